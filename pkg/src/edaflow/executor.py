"""Run rendered stage scripts against a backend.

Two backends exist. ``mock`` writes the script, fabricates the stage's
declared reports and deliverables, and succeeds. ``external`` launches a
configured command as a child process with a scrubbed environment.

Each workspace keeps a ``manifest`` file (JSON, rewritten atomically) with
one checkpoint entry per completed stage run.
"""
from __future__ import annotations

import gzip
import io
import json
import logging
import os
import shlex
import shutil
import subprocess
import tarfile
import tempfile
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fnmatch import fnmatch
from pathlib import Path

from .errors import (
    ArchiveWriteFailed,
    BackendUnavailable,
    ExecutionTimeout,
    NoMatches,
    WorkspaceMissing,
)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 300.0
MANIFEST = "manifest"
ROUTE_REPORTS = ("route_summary.rpt", "postRoute_drc_max1M.rpt", "congestion.rpt")

STAGE_REPORTS = {
    "synthesis": ("timing.rpt", "area.rpt", "power.rpt", "qor.rpt"),
    "placement": ("place_timing.rpt", "place_density.rpt", "place_check.rpt"),
    "cts": ("cts_skew.rpt", "cts_clock_trees.rpt", "cts_timing.rpt"),
    "route": ROUTE_REPORTS,
}

# files under results/ the mock backend fabricates; {top} is the top module
STAGE_DELIVERABLES = {
    "synthesis": ("{top}.mapped.v", "{top}.mapped.sdc"),
    "placement": ("placement.enc",),
    "cts": ("cts.enc",),
    "route": ("route.enc", "{top}.def", "{top}.gds", "{top}.spef", "{top}.route.v", "{top}.lef"),
}

DELIVERY_PATTERNS = ("*.gds", "*.gds.gz", "*.def", "*.lef", "*.spef", "*.v")
ARCHIVE_SUFFIXES = (".tar", ".tar.gz", ".tgz")


@dataclass(frozen=True)
class ExecutionBackend:
    kind: str = "mock"
    command_template: str = ""
    env_passthrough: tuple = ()
    timeout: float = DEFAULT_TIMEOUT
    # mock only: stages forced to fail, and an artificial run time
    fail_stages: frozenset = frozenset()
    delay: float = 0.0

    def __post_init__(self):
        if self.kind not in ("mock", "external"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "external" and not self.command_template.strip():
            raise ValueError("external backend needs a command_template")
        object.__setattr__(self, "env_passthrough", tuple(self.env_passthrough))
        object.__setattr__(self, "fail_stages", frozenset(self.fail_stages))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {"kind", "command_template", "env_passthrough", "timeout", "fail_stages", "delay"}
        unknown = set(d) - known
        if unknown:
            raise ValueError("unknown backend config keys: " + ", ".join(sorted(unknown)))
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ExecutionResult:
    exit_status: str  # ok | failed
    stdout_excerpt: str
    produced_reports: list
    checkpoint: str | None = None
    duration: float = 0.0
    exit_code: int | None = None

    @property
    def ok(self):
        return self.exit_status == "ok"


@dataclass(frozen=True)
class ArtifactManifest:
    patterns: tuple = DELIVERY_PATTERNS
    archive_name: str = "artifacts.tar"
    compress: bool = False

    def __post_init__(self):
        object.__setattr__(self, "patterns", tuple(self.patterns))
        if not self.patterns:
            raise ValueError("artifact manifest needs at least one pattern")
        if not self.archive_name.endswith(ARCHIVE_SUFFIXES):
            raise ValueError(f"archive name {self.archive_name!r} lacks an archive suffix")


def archive_name(design, version, compress=False):
    return f"{design}_{version}_artifacts" + (".tar.gz" if compress else ".tar")


def ensure_workspace(path) -> Path:
    ws = Path(path)
    for sub in ("scripts", "reports", "results"):
        (ws / sub).mkdir(parents=True, exist_ok=True)
    return ws


def _excerpt(text, limit=2000):
    return text if len(text) <= limit else "...\n" + text[-limit:]


def mock_report(stage, design, values) -> str:
    lines = [f"# MOCK {stage} {design}",
             f"# timestamp {datetime.now(timezone.utc).isoformat()}"]
    lines += [f"param {k} = {values[k]}" for k in sorted(values)]
    return "\n".join(lines) + "\n"


def execute(script, backend: ExecutionBackend, workspace) -> ExecutionResult:
    ws = Path(workspace)
    if not ws.is_dir():
        raise WorkspaceMissing(f"workspace {ws} does not exist")
    ensure_workspace(ws)
    script_path = ws / "scripts" / f"{script.stage}.tcl"
    script_path.write_text(script.text, encoding="utf-8")
    start = time.monotonic()
    if backend.kind == "mock":
        result = _run_mock(script, backend, ws)
    else:
        result = _run_external(script, backend, ws, script_path)
    result.duration = time.monotonic() - start
    if result.ok:
        result.checkpoint = record_checkpoint(
            ws, script.stage, reports=result.produced_reports,
            meta={"design": script.values.get("DESIGN", ""), "top_name": script.values.get("TOP_NAME", "")},
        )
    return result


def _run_mock(script, backend, ws):
    if backend.delay:
        time.sleep(backend.delay)
    stage = script.stage
    design = script.values.get("DESIGN", "unknown")
    if stage in backend.fail_stages:
        msg = f"# MOCK {stage} {design}\nError: injected failure for stage {stage}\n"
        (ws / "reports" / f"{stage}.log").write_text(msg)
        return ExecutionResult("failed", msg, [], exit_code=1)
    top = script.values.get("TOP_NAME", design)
    user_values = {k: v for k, v in script.values.items()}
    for name in STAGE_REPORTS[stage]:
        (ws / "reports" / name).write_text(mock_report(stage, design, user_values))
    for pattern in STAGE_DELIVERABLES[stage]:
        name = pattern.format(top=top)
        (ws / "results" / name).write_text(f"# MOCK {stage} deliverable {name} for {design}\n")
    log_text = f"# MOCK {stage} {design}\n{stage} completed: {len(STAGE_REPORTS[stage])} reports\n"
    (ws / "reports" / f"{stage}.log").write_text(log_text)
    return ExecutionResult("ok", log_text, list(STAGE_REPORTS[stage]), exit_code=0)


def build_command(template: str, script_path, workspace) -> list[str]:
    return [tok.replace("{script}", str(script_path)).replace("{workspace}", str(workspace))
            for tok in shlex.split(template)]


def child_env(backend, exports, environ=None) -> dict:
    """Environment for the child: passthrough names plus the stage exports only."""
    environ = os.environ if environ is None else environ
    env = {name: environ[name] for name in backend.env_passthrough if name in environ}
    env.update(dict(exports))
    return env


def _run_external(script, backend, ws, script_path):
    argv = build_command(backend.command_template, script_path, ws)
    if not argv:
        raise BackendUnavailable("empty command")
    exe = shutil.which(argv[0])
    if exe is None:
        raise BackendUnavailable(f"command not found: {argv[0]}")
    argv[0] = exe
    try:
        proc = subprocess.run(
            argv, cwd=ws, env=child_env(backend, script.env),
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True,
            timeout=backend.timeout,
        )
    except subprocess.TimeoutExpired:
        raise ExecutionTimeout(f"{script.stage} exceeded {backend.timeout}s") from None
    except OSError as e:
        raise BackendUnavailable(str(e)) from e
    (ws / "reports" / f"{script.stage}.log").write_text(proc.stdout)
    declared = STAGE_REPORTS[script.stage]
    present = [r for r in declared if (ws / "reports" / r).is_file()]
    excerpt = _excerpt(proc.stdout)
    if proc.returncode != 0:
        return ExecutionResult("failed", excerpt or f"exit status {proc.returncode}",
                               present, exit_code=proc.returncode)
    missing = [r for r in declared if r not in present]
    if missing:
        excerpt += "\nmissing reports: " + ", ".join(missing)
        return ExecutionResult("failed", excerpt, present, exit_code=proc.returncode)
    return ExecutionResult("ok", excerpt, present, exit_code=0)


# -- checkpoints -------------------------------------------------------------

def read_manifest(workspace) -> dict | None:
    path = Path(workspace) / MANIFEST
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text())
        if not isinstance(doc, dict) or not isinstance(doc.get("checkpoints"), list):
            raise ValueError("no checkpoint list")
        return doc
    except (ValueError, OSError) as e:
        log.warning("ignoring corrupted manifest %s: %s", path, e)
        return None


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def record_checkpoint(workspace, stage, reports=(), meta=None, timestamp=None) -> str:
    ws = Path(workspace)
    doc = read_manifest(ws) or {"checkpoints": []}
    seq = 1 + sum(1 for c in doc["checkpoints"] if c.get("stage") == stage)
    label = f"{stage}-{seq}"
    doc["checkpoints"].append({
        "label": label,
        "stage": stage,
        "timestamp": time.time() if timestamp is None else timestamp,
        "seq": len(doc["checkpoints"]),
        "complete": True,
        "reports": list(reports),
        "meta": dict(meta or {}),
    })
    _write_atomic(ws / MANIFEST, json.dumps(doc, indent=1))
    return label


def checkpoint_entry(workspace, stage) -> dict | None:
    doc = read_manifest(workspace)
    if doc is None:
        return None
    try:
        done = [c for c in doc["checkpoints"] if c.get("stage") == stage and c.get("complete")]
        if not done:
            return None
        return max(done, key=lambda c: (float(c["timestamp"]), int(c.get("seq", 0))))
    except (KeyError, TypeError, ValueError) as e:
        log.warning("ignoring corrupted manifest in %s: %s", workspace, e)
        return None


def locate_checkpoint(workspace, stage) -> str | None:
    entry = checkpoint_entry(workspace, stage)
    return None if entry is None else entry["label"]


# -- artifacts ---------------------------------------------------------------

def _matches(rel: str, patterns) -> bool:
    name = rel.rsplit("/", 1)[-1]
    return any(fnmatch(rel, p) or fnmatch(name, p) for p in patterns)


def matching_files(workspace, patterns, exclude=()) -> list[str]:
    ws = Path(workspace)
    out = []
    for path in ws.rglob("*"):
        if not path.is_file():
            continue
        rel = path.relative_to(ws).as_posix()
        if rel in exclude:
            continue
        if _matches(rel, patterns):
            out.append(rel)
    return sorted(out)


def collect_artifacts(workspace, manifest: ArtifactManifest) -> Path:
    ws = Path(workspace)
    if not ws.is_dir():
        raise WorkspaceMissing(f"workspace {ws} does not exist")
    files = matching_files(ws, manifest.patterns, exclude={manifest.archive_name})
    if not files:
        raise NoMatches("no files match " + ", ".join(manifest.patterns))
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w", format=tarfile.USTAR_FORMAT) as tar:
        for rel in files:
            data = (ws / rel).read_bytes()
            info = tarfile.TarInfo(rel)
            info.size = len(data)
            info.mtime = 0
            info.mode = 0o644
            info.uid = info.gid = 0
            info.uname = info.gname = ""
            tar.addfile(info, io.BytesIO(data))
    payload = buf.getvalue()
    if manifest.compress:
        payload = gzip.compress(payload, mtime=0)
    out = ws / manifest.archive_name
    try:
        _write_bytes_atomic(out, payload)
    except OSError as e:
        raise ArchiveWriteFailed(str(e)) from e
    return out


def _write_bytes_atomic(path: Path, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".archive.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def archive_members(path) -> list[str]:
    with tarfile.open(path) as tar:
        return tar.getnames()
