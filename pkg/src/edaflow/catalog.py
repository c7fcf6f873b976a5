"""Stage parameter catalog.

One entry per tunable stage parameter. ``name`` is the service-side field,
``key`` the short name the agent reports (``fanout_limit`` for
``drc_max_fanout``), ``placeholder`` the template slot, ``env`` the exported
environment variable (if any) and ``phrases`` the natural-language aliases,
the first of which is canonical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from ._data import load_json

STAGES = ("synthesis", "placement", "cts", "route")
TOOL_NAMES = {"synthesis": "synth", "placement": "placement", "cts": "cts", "route": "route"}
TOOL_TO_STAGE = {v: k for k, v in TOOL_NAMES.items()}

TRUE_WORDS = {"true", "on", "yes", "enabled", "enable", "1"}
FALSE_WORDS = {"false", "off", "no", "disabled", "disable", "0"}


@dataclass(frozen=True)
class ParamSpec:
    name: str
    stage: str
    kind: str  # enum | real | int | bool | text
    placeholder: str
    phrases: tuple = ()
    key: str = ""
    options: tuple = ()
    low: float | None = None
    high: float | None = None
    low_open: bool = False
    env: str | None = None
    unit: str | None = None
    sample: bool = True

    def __post_init__(self):
        if not self.key:
            object.__setattr__(self, "key", self.name)
        object.__setattr__(self, "phrases", tuple(self.phrases))
        object.__setattr__(self, "options", tuple(self.options))

    @property
    def continuous(self):
        return self.kind in ("real", "int")

    def describe_range(self):
        if self.kind == "enum":
            return "one of " + "/".join(self.options)
        if self.kind == "bool":
            return "true/false"
        if self.continuous:
            lo = "(" if self.low_open else "["
            return f"{lo}{self.low}, {self.high}]"
        return "text"

    def validate(self, value):
        """Return the normalized value or raise ValueError."""
        if self.kind == "enum":
            v = str(value).strip().lower()
            if v not in self.options:
                raise ValueError(f"{value!r} is not {self.describe_range()}")
            return v
        if self.kind == "bool":
            if isinstance(value, bool):
                return value
            v = str(value).strip().lower()
            if v in TRUE_WORDS:
                return True
            if v in FALSE_WORDS:
                return False
            raise ValueError(f"{value!r} is not a boolean")
        if self.kind == "text":
            v = str(value)
            if not v.strip():
                raise ValueError("empty text")
            return v
        if isinstance(value, bool):
            raise ValueError(f"{value!r} is not numeric")
        try:
            num = float(value)
        except (TypeError, ValueError):
            raise ValueError(f"{value!r} is not numeric") from None
        if not math.isfinite(num):
            raise ValueError(f"{value!r} is not finite")
        if self.kind == "int":
            if num != int(num):
                raise ValueError(f"{value!r} is not an integer")
            num = int(num)
        elif isinstance(value, int):
            num = value
        if self.low is not None:
            if (num <= self.low) if self.low_open else (num < self.low):
                raise ValueError(f"{value!r} outside {self.describe_range()}")
        if self.high is not None and num > self.high:
            raise ValueError(f"{value!r} outside {self.describe_range()}")
        return num


def tcl_value(value) -> str:
    """Text form of a parameter value as it appears in a script."""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


@dataclass(frozen=True)
class Catalog:
    params: tuple
    designs: tuple = ()
    technologies: tuple = ()
    _by_stage: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        by_stage = {s: {} for s in STAGES}
        for p in self.params:
            stage_map = by_stage[p.stage]
            if p.name in stage_map:
                raise ValueError(f"duplicate parameter {p.stage}.{p.name}")
            stage_map[p.name] = p
        object.__setattr__(self, "_by_stage", by_stage)

    def stage_params(self, stage) -> dict[str, ParamSpec]:
        return self._by_stage[stage]

    def get(self, stage, name_or_key) -> ParamSpec | None:
        m = self._by_stage[stage]
        if name_or_key in m:
            return m[name_or_key]
        for p in m.values():
            if p.key == name_or_key:
                return p
        return None


@lru_cache(maxsize=None)
def default_catalog() -> Catalog:
    doc = load_json("parameters.json")
    params = tuple(ParamSpec(**p) for p in doc["parameters"])
    return Catalog(params, tuple(doc["designs"]), tuple(doc["technologies"]))
