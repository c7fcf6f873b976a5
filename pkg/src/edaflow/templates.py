"""Placeholder templates for stage TCL scripts.

Placeholders are written ``${UPPER_SNAKE}``. An odd run of backslashes
directly before the ``$`` escapes it, so literal TCL such as ``\\${X}``
survives rendering untouched. Values may themselves contain placeholders;
they are expanded recursively up to ``MAX_DEPTH`` levels.

Environment exports are emitted as ``set env(NAME) "value"`` lines in place
of a single ``# @ENV_EXPORTS`` marker line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ._data import data_path
from .errors import (
    DepthExceeded,
    MissingRequiredPlaceholder,
    TemplateError,
    UnresolvedPlaceholder,
)

STAGES = ("synthesis", "placement", "cts", "route")
MAX_DEPTH = 8
ENV_MARKER = "# @ENV_EXPORTS"

_NAME_RE = re.compile(r"[A-Z0-9_]+\Z")
_PLACEHOLDER_RE = re.compile(r"\$\{([A-Z0-9_]+)\}")
_META_RE = re.compile(r"#@\s*([A-Za-z_]+)\s*:\s*(.*)$")


def _scan(text):
    """Yield (start, end, name) for every unescaped placeholder."""
    for m in _PLACEHOLDER_RE.finditer(text):
        i = m.start() - 1
        slashes = 0
        while i >= 0 and text[i] == "\\":
            slashes += 1
            i -= 1
        if slashes % 2 == 0:
            yield m.start(), m.end(), m.group(1)


def find_placeholders(text: str) -> set[str]:
    return {name for _, _, name in _scan(text)}


def substitute_once(text: str, mapping: Mapping[str, str]) -> str:
    """One left-to-right substitution pass; unknown names are left in place."""
    out = []
    pos = 0
    for start, end, name in _scan(text):
        if name in mapping:
            out.append(text[pos:start])
            out.append(mapping[name])
            pos = end
    out.append(text[pos:])
    return "".join(out)


@dataclass(frozen=True)
class TclTemplate:
    stage: str
    body: str
    required_placeholders: frozenset = frozenset()
    optional_placeholders: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise TemplateError(f"unknown stage {self.stage!r}")
        required = frozenset(self.required_placeholders)
        object.__setattr__(self, "required_placeholders", required)
        object.__setattr__(self, "optional_placeholders", dict(self.optional_placeholders))
        optional = set(self.optional_placeholders)
        bad = [n for n in required | optional if not _NAME_RE.match(n)]
        if bad:
            raise TemplateError("illegal placeholder names: " + ", ".join(sorted(bad)))
        both = required & optional
        if both:
            raise TemplateError("placeholders both required and optional: " + ", ".join(sorted(both)))
        undeclared = find_placeholders(self.body) - required - optional
        if undeclared:
            raise TemplateError("undeclared placeholders in body: " + ", ".join(sorted(undeclared)))

    @property
    def placeholders(self) -> set[str]:
        return set(self.required_placeholders) | set(self.optional_placeholders)


@dataclass(frozen=True)
class ParamBinding:
    values: Mapping[str, str] = field(default_factory=dict)
    env_exports: Sequence[tuple[str, str]] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", {k: str(v) for k, v in dict(self.values).items()})
        exports = tuple((str(k), str(v)) for k, v in self.env_exports)
        for name, _ in exports:
            if not name or any(c.isspace() for c in name):
                raise TemplateError(f"illegal environment variable name {name!r}")
        object.__setattr__(self, "env_exports", exports)


@dataclass(frozen=True)
class RenderedScript:
    stage: str
    text: str
    provenance: Mapping[str, str]
    # resolved placeholder values and the exported environment, kept so the
    # executor can echo parameters and forward the exports
    values: Mapping[str, str] = field(default_factory=dict)
    env: tuple = ()


def list_placeholders(template: TclTemplate) -> set[str]:
    return find_placeholders(template.body)


def _resolve(mapping: Mapping[str, str], names, max_depth: int) -> dict[str, str]:
    resolved: dict[str, str] = {}

    def expand(name, stack):
        if name in resolved:
            return resolved[name]
        if name not in mapping:
            raise UnresolvedPlaceholder({name})
        if name in stack or len(stack) >= max_depth:
            raise DepthExceeded(set(stack) | {name}, max_depth)
        raw = mapping[name]
        inner = {}
        for n in find_placeholders(raw):
            inner[n] = expand(n, stack + (name,))
        resolved[name] = substitute_once(raw, inner)
        return resolved[name]

    for n in sorted(names):
        expand(n, ())
    return resolved


def _env_lines(exports) -> str:
    return "".join(f'set env({name}) "{value}"\n' for name, value in exports)


def _inject_env(text: str, exports) -> str:
    lines = text.splitlines(keepends=True)
    hits = [i for i, line in enumerate(lines) if line.strip() == ENV_MARKER]
    if not hits:
        if exports:
            raise TemplateError(f"template has no {ENV_MARKER} line but exports were given")
        return text
    if len(hits) > 1:
        raise TemplateError(f"template has {len(hits)} {ENV_MARKER} lines")
    i = hits[0]
    block = _env_lines(exports)
    if block and not lines[i].endswith("\n"):
        block = block.rstrip("\n")
    return "".join(lines[:i]) + block + "".join(lines[i + 1:])


def render(template: TclTemplate, binding: ParamBinding, max_depth: int = MAX_DEPTH) -> RenderedScript:
    missing = template.required_placeholders - set(binding.values)
    if missing:
        raise MissingRequiredPlaceholder(missing)
    mapping = {**template.optional_placeholders, **binding.values}
    used = find_placeholders(template.body)
    resolved = _resolve(mapping, used, max_depth)
    text = substitute_once(template.body, resolved)
    text = _inject_env(text, binding.env_exports)
    provenance = {n: ("user" if n in binding.values else "default") for n in resolved}
    return RenderedScript(
        stage=template.stage,
        text=text,
        provenance=provenance,
        values=resolved,
        env=tuple(binding.env_exports),
    )


# -- template files ----------------------------------------------------------

def parse_template(source: str, stage: str | None = None) -> TclTemplate:
    """Parse a template file: leading ``#@ key: value`` lines, then the body.

    Recognised keys: ``stage``, ``required`` (names separated by spaces or
    commas) and ``optional`` (one ``NAME=default`` per line).
    """
    lines = source.splitlines(keepends=True)
    meta_stage = None
    required: set[str] = set()
    optional: dict[str, str] = {}
    n = 0
    for line in lines:
        m = _META_RE.match(line.rstrip("\r\n"))
        if not m:
            break
        key, value = m.group(1).lower(), m.group(2).strip()
        if key == "stage":
            meta_stage = value
        elif key == "required":
            required.update(v for v in re.split(r"[\s,]+", value) if v)
        elif key == "optional":
            name, sep, default = value.partition("=")
            if not sep:
                raise TemplateError(f"optional placeholder needs NAME=default: {value!r}")
            optional[name.strip()] = default.strip()
        else:
            raise TemplateError(f"unknown template metadata key {key!r}")
        n += 1
    stage = stage or meta_stage
    if stage is None:
        raise TemplateError("template does not declare a stage")
    return TclTemplate(stage, "".join(lines[n:]), frozenset(required), optional)


def load_template(path) -> TclTemplate:
    return parse_template(Path(path).read_text(encoding="utf-8"))


def shipped_template(stage: str) -> TclTemplate:
    if stage not in STAGES:
        raise TemplateError(f"unknown stage {stage!r}")
    src = data_path("templates", f"{stage}.tcl").read_text("utf-8")
    return parse_template(src)
