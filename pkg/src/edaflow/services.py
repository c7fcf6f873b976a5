"""The four stage services: synthesis, unified placement, CTS and route.

Every service validates a typed request, resolves its versioned workspace,
renders the stage template and hands the script to the executor. Workspaces:

    <root>/<design>/synthesis/<syn_ver>/{scripts,reports,results,manifest}
    <root>/<design>/impl/<impl_ver>/{scripts,reports,results,manifest}

Placement, CTS and route of one implementation share the impl workspace;
each stage only adds its own files and manifest entries.
"""
from __future__ import annotations

import re
from contextlib import contextmanager
from pathlib import Path
from typing import Any, ClassVar

from filelock import FileLock, Timeout
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import executor
from .catalog import default_catalog, tcl_value
from .errors import (
    EdaFlowError,
    ExecutorFailure,
    InvalidRequest,
    MissingUpstream,
    NegativeIndex,
    WorkspaceConflict,
)
from .executor import ArtifactManifest, ExecutionBackend
from .templates import ParamBinding, render, shipped_template

LABEL_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*\Z")
IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*\Z")
_IMPL_RE = re.compile(r"(.+)__g(0|[1-9][0-9]*)__p(0|[1-9][0-9]*)\Z")


def make_impl_ver(syn_ver: str, g_idx: int, p_idx: int) -> str:
    """Implementation label binding a synthesis version to config indices."""
    for name, idx in (("g_idx", g_idx), ("p_idx", p_idx)):
        if isinstance(idx, bool) or not isinstance(idx, int):
            raise TypeError(f"{name} must be an int, got {idx!r}")
        if idx < 0:
            raise NegativeIndex(f"{name} must be nonnegative, got {idx}")
    if not isinstance(syn_ver, str) or not LABEL_RE.match(syn_ver):
        raise ValueError(f"illegal version label {syn_ver!r}")
    return f"{syn_ver}__g{g_idx}__p{p_idx}"


def parse_impl_ver(impl_ver: str) -> tuple[str, int, int]:
    m = _IMPL_RE.match(impl_ver)
    if not m:
        raise ValueError(f"not an implementation label: {impl_ver!r}")
    return m.group(1), int(m.group(2)), int(m.group(3))


# -- request / response models ----------------------------------------------

def _check_label(problems, field, value):
    if not LABEL_RE.match(value or ""):
        problems.append((field, f"illegal label {value!r}"))


def _check_params(problems, stage, params: dict, prefix="") -> dict:
    catalog = default_catalog()
    out = {}
    for key, value in params.items():
        spec = catalog.get(stage, key)
        if spec is None:
            problems.append((prefix + key, f"unknown {stage} parameter"))
            continue
        if spec.name in out:
            problems.append((prefix + key, f"given twice (as {spec.name})"))
            continue
        try:
            out[spec.name] = spec.validate(value)
        except ValueError as e:
            problems.append((prefix + key, str(e)))
    return out


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")

    stage: ClassVar[str] = ""
    design: str
    tech: str = "FreePDK45"

    def user_params(self) -> dict[str, Any]:
        catalog = default_catalog()
        return {n: getattr(self, n) for n in catalog.stage_params(self.stage)
                if getattr(self, n, None) is not None}

    def _identity_problems(self):
        problems = []
        _check_label(problems, "design", self.design)
        if not self.tech.strip():
            problems.append(("tech", "empty technology"))
        return problems

    @model_validator(mode="after")
    def _validate(self):
        problems = self._identity_problems()
        checked = _check_params(problems, self.stage, self.user_params())
        for name, value in checked.items():
            object.__setattr__(self, name, value)
        if problems:
            raise InvalidRequest(problems)
        return self


class SynthRequest(_Request):
    stage: ClassVar[str] = "synthesis"
    rtl_dir: str | None = None
    top_name: str | None = None
    syn_version: str = "v1"
    clk_period: float | None = None
    drc_max_fanout: float | None = None
    max_transition: float | None = None
    max_capacitance: float | None = None
    input_delay: float | None = None
    output_delay: float | None = None
    clock_uncertainty: float | None = None
    max_area: float | None = None
    map_effort: str | None = None
    power_effort: str | None = None
    area_effort: str | None = None
    hdl_format: str | None = None
    wire_load_mode: str | None = None
    clock_port: str | None = None
    clock_name: str | None = None

    def _identity_problems(self):
        problems = super()._identity_problems()
        _check_label(problems, "syn_version", self.syn_version)
        if self.top_name is not None and not IDENT_RE.match(self.top_name):
            problems.append(("top_name", f"not an identifier: {self.top_name!r}"))
        return problems


class PlacementRequest(_Request):
    stage: ClassVar[str] = "placement"
    syn_ver: str
    g_idx: int = Field(0, ge=0)
    p_idx: int = Field(0, ge=0)
    top_name: str | None = None
    stage_params: dict[str, Any] = Field(default_factory=dict)

    def user_params(self):
        return dict(self.stage_params)

    @model_validator(mode="after")
    def _validate(self):
        problems = self._identity_problems()
        _check_label(problems, "syn_ver", self.syn_ver)
        self.stage_params = _check_params(problems, "placement", self.stage_params, "stage_params.")
        if problems:
            raise InvalidRequest(problems)
        return self

    @property
    def impl_ver(self):
        return make_impl_ver(self.syn_ver, self.g_idx, self.p_idx)


class CtsRequest(_Request):
    stage: ClassVar[str] = "cts"
    impl_ver: str
    cts_cell_density: float | None = None
    postcts_opt_max_density: float | None = None
    max_transition: float | None = None
    target_skew: float | None = None
    postcts_opt_effort: str | None = None
    cts_update_io_latency: bool | None = None
    postcts_hold_fix: bool | None = None

    def _identity_problems(self):
        problems = super()._identity_problems()
        _check_label(problems, "impl_ver", self.impl_ver)
        return problems


class RouteRequest(_Request):
    stage: ClassVar[str] = "route"
    impl_ver: str
    route_params: dict[str, Any] = Field(default_factory=dict)
    collect_artifacts: bool = False

    def user_params(self):
        return dict(self.route_params)

    @model_validator(mode="after")
    def _validate(self):
        problems = self._identity_problems()
        _check_label(problems, "impl_ver", self.impl_ver)
        self.route_params = _check_params(problems, "route", self.route_params, "route_params.")
        if problems:
            raise InvalidRequest(problems)
        return self


REQUEST_TYPES = {
    "synthesis": SynthRequest,
    "placement": PlacementRequest,
    "cts": CtsRequest,
    "route": RouteRequest,
}


class StageResponse(BaseModel):
    status: str  # success | error
    stage: str
    rendered_tcl: str = ""
    report_paths: list[str] = Field(default_factory=list)
    log_excerpt: str = ""
    version: str = ""
    provenance: dict[str, str] = Field(default_factory=dict)
    params: dict[str, Any] = Field(default_factory=dict)
    constraints: dict[str, Any] = Field(default_factory=dict)
    artifacts: list[str] = Field(default_factory=list)
    workspace: str = ""
    checkpoint: str | None = None


def coerce_request(stage, req):
    cls = REQUEST_TYPES[stage]
    if isinstance(req, cls):
        return req
    if isinstance(req, BaseModel):
        req = req.model_dump()
    if not isinstance(req, dict):
        raise InvalidRequest([("body", "request must be a JSON object")])
    try:
        return cls.model_validate(req)
    except ValidationError as e:
        problems = []
        for err in e.errors():
            inner = (err.get("ctx") or {}).get("error")
            if isinstance(inner, InvalidRequest):
                problems.extend(inner.problems)
            else:
                loc = ".".join(str(p) for p in err["loc"]) or "body"
                problems.append((loc, err["msg"]))
        raise InvalidRequest(problems) from None


# -- services ----------------------------------------------------------------

class StageServices:
    """All four stage services over one workspace root.

    The methods are safe to call from many threads: every mutation happens
    inside a per-version workspace guarded by a nonblocking file lock, so a
    second request for a busy version gets ``WorkspaceConflict``.
    """

    def __init__(self, root, backend: ExecutionBackend | None = None, tech_root=None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.backend = backend or ExecutionBackend()
        self.tech_root = Path(tech_root) if tech_root else self.root / "tech"
        self.templates = {s: shipped_template(s) for s in REQUEST_TYPES}

    # layout
    def synthesis_dir(self, design, syn_ver) -> Path:
        return self.root / design / "synthesis" / syn_ver

    def impl_dir(self, design, impl_ver) -> Path:
        return self.root / design / "impl" / impl_ver

    def has_checkpoint(self, design, stage, version) -> bool:
        ws = self.synthesis_dir(design, version) if stage == "synthesis" else self.impl_dir(design, version)
        return executor.locate_checkpoint(ws, stage) is not None

    def latest_synthesis(self, design) -> str | None:
        base = self.root / design / "synthesis"
        if not base.is_dir():
            return None
        best = None
        for ws in base.iterdir():
            entry = executor.checkpoint_entry(ws, "synthesis")
            if entry is not None and (best is None or entry["timestamp"] > best[0]):
                best = (entry["timestamp"], ws.name)
        return best and best[1]

    def latest_version(self, design, stage) -> str | None:
        """Newest version label holding a completed ``stage`` checkpoint."""
        if stage == "synthesis":
            return self.latest_synthesis(design)
        base = self.root / design / "impl"
        if not base.is_dir():
            return None
        best = None
        for ws in sorted(base.iterdir()):
            entry = executor.checkpoint_entry(ws, stage)
            if entry is None:
                continue
            key = (float(entry["timestamp"]), int(entry.get("seq", 0)))
            if best is None or key > best[0]:
                best = (key, ws.name)
        return best and best[1]

    def next_syn_version(self, design) -> str:
        base = self.root / design / "synthesis"
        n = 1
        while (base / f"v{n}").exists():
            n += 1
        return f"v{n}"

    @contextmanager
    def version_lock(self, design, kind, version):
        lock_dir = self.root / ".locks"
        lock_dir.mkdir(exist_ok=True)
        lock = FileLock(str(lock_dir / f"{design}.{kind}.{version}.lock"), timeout=0)
        try:
            lock.acquire()
        except Timeout:
            raise WorkspaceConflict(f"{kind} version {version} of {design} is already running") from None
        try:
            yield
        finally:
            lock.release()

    def _tech_values(self, tech):
        base = self.tech_root / tech
        return {
            "TARGET_LIBRARY": f"{base}/lib/{tech}_typical.db",
            "LINK_LIBRARY": f"{base}/lib/{tech}_typical.db",
            "LEF_FILES": f"{base}/lef/{tech}.lef",
            "MMMC_FILE": f"{base}/mmmc.tcl",
        }

    def _binding(self, stage, params, base_values):
        catalog = default_catalog()
        values = dict(base_values)
        exports = []
        for name, value in params.items():
            spec = catalog.stage_params(stage)[name]
            values[spec.placeholder] = tcl_value(value)
            if spec.env:
                exports.append((spec.env, tcl_value(value)))
        return ParamBinding(values, exports)

    def _run(self, stage, req, ws, version, base_values, constraints=None, after=None):
        params = req.user_params()
        rendered = render(self.templates[stage], self._binding(stage, params, base_values))
        executor.ensure_workspace(ws)
        response = StageResponse(
            status="success", stage=stage, rendered_tcl=rendered.text, version=version,
            provenance=dict(rendered.provenance), params=params, workspace=str(ws),
        )
        if constraints:
            response.constraints = constraints(rendered.values)
        try:
            result = executor.execute(rendered, self.backend, ws)
        except EdaFlowError as e:
            response.status = "error"
            response.log_excerpt = f"{e.kind}: {e}"
            raise ExecutorFailure(f"{stage}: {e}", response) from e
        response.log_excerpt = result.stdout_excerpt
        response.report_paths = list(result.produced_reports)
        response.checkpoint = result.checkpoint
        if not result.ok:
            response.status = "error"
            raise ExecutorFailure(f"{stage} failed (exit {result.exit_code})", response)
        if after:
            after(response)
        return response

    def run_synthesis(self, req) -> StageResponse:
        req = coerce_request("synthesis", req)
        ws = self.synthesis_dir(req.design, req.syn_version)
        top = req.top_name or req.design
        with self.version_lock(req.design, "synthesis", req.syn_version):
            rtl_dir = Path(req.rtl_dir) if req.rtl_dir else self.root / req.design / "rtl"
            if not rtl_dir.is_dir():
                if self.backend.kind != "mock":
                    raise InvalidRequest([("rtl_dir", f"{rtl_dir} does not exist")])
                rtl_dir.mkdir(parents=True)
                (rtl_dir / f"{top}.v").write_text(f"// placeholder RTL for {top}\nmodule {top}(); endmodule\n")
            base = {
                "DESIGN": req.design, "TECH": req.tech, "TOP_NAME": top, "RTL_DIR": str(rtl_dir),
                "SYN_VERSION": req.syn_version, "RESULT_DIR": str(ws / "results"),
                "REPORT_DIR": str(ws / "reports"), **self._tech_values(req.tech),
            }
            base = {k: v for k, v in base.items() if k in self.templates["synthesis"].placeholders}
            return self._run("synthesis", req, ws, req.syn_version, base)

    def run_placement(self, req) -> StageResponse:
        req = coerce_request("placement", req)
        syn_ws = self.synthesis_dir(req.design, req.syn_ver)
        upstream = executor.checkpoint_entry(syn_ws, "synthesis")
        if upstream is None:
            raise MissingUpstream(f"no completed synthesis {req.syn_ver!r} for design {req.design}")
        impl_ver = req.impl_ver
        ws = self.impl_dir(req.design, impl_ver)
        top = req.top_name or upstream.get("meta", {}).get("top_name") or req.design
        with self.version_lock(req.design, "impl", impl_ver):
            base = {
                "DESIGN": req.design, "TECH": req.tech, "TOP_NAME": top,
                "SYN_VER": req.syn_ver, "IMPL_VER": impl_ver,
                "NETLIST": str(syn_ws / "results" / f"{top}.mapped.v"),
                "SDC_FILE": str(syn_ws / "results" / f"{top}.mapped.sdc"),
                "RESULT_DIR": str(ws / "results"), "REPORT_DIR": str(ws / "reports"),
            }
            tech = self._tech_values(req.tech)
            base["LEF_FILES"] = tech["LEF_FILES"]
            base["MMMC_FILE"] = tech["MMMC_FILE"]
            return self._run("placement", req, ws, impl_ver, base)

    def _impl_upstream(self, req, needed):
        ws = self.impl_dir(req.design, req.impl_ver)
        entry = executor.checkpoint_entry(ws, needed)
        if entry is None:
            raise MissingUpstream(f"no completed {needed} in {req.design} implementation {req.impl_ver!r}")
        return ws, entry.get("meta", {}).get("top_name") or req.design

    def run_cts(self, req) -> StageResponse:
        req = coerce_request("cts", req)
        ws, top = self._impl_upstream(req, "placement")

        def constraints(values):
            return {
                "objective": "minimize max_skew",
                "subject_to": "transition_time <= max_transition",
                "max_transition": float(values["CTS_MAX_TRANSITION"]),
                "target_skew": float(values["CTS_TARGET_SKEW"]),
            }

        with self.version_lock(req.design, "impl", req.impl_ver):
            base = {"DESIGN": req.design, "TOP_NAME": top, "IMPL_VER": req.impl_ver,
                    "RESULT_DIR": str(ws / "results"), "REPORT_DIR": str(ws / "reports")}
            return self._run("cts", req, ws, req.impl_ver, base, constraints=constraints)

    def run_route(self, req) -> StageResponse:
        req = coerce_request("route", req)
        ws, top = self._impl_upstream(req, "cts")

        def collect(response):
            if req.collect_artifacts:
                manifest = ArtifactManifest(archive_name=executor.archive_name(req.design, req.impl_ver))
                try:
                    path = executor.collect_artifacts(ws, manifest)
                except EdaFlowError as e:
                    response.status = "error"
                    response.log_excerpt += f"\n{e.kind}: {e}"
                    raise ExecutorFailure(f"route artifact collection: {e}", response) from e
                response.artifacts = [path.name]

        with self.version_lock(req.design, "impl", req.impl_ver):
            base = {"DESIGN": req.design, "TOP_NAME": top, "IMPL_VER": req.impl_ver,
                    "RESULT_DIR": str(ws / "results"), "REPORT_DIR": str(ws / "reports")}
            return self._run("route", req, ws, req.impl_ver, base, after=collect)

    def run(self, stage, req) -> StageResponse:
        runners = {"synthesis": self.run_synthesis, "placement": self.run_placement,
                   "cts": self.run_cts, "route": self.run_route}
        return runners[stage](req)
