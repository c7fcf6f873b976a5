"""Benchmark case generation.

A case is a ground-truth tool call (stage plus 6 to 10 parameters, design and
technology always included) and a prompt that verbalises it in one of four
tones. Prompts come from a language model or, for hermetic runs, from a
deterministic renderer that uses each parameter's canonical phrase.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .catalog import STAGES, TOOL_NAMES, TOOL_TO_STAGE, Catalog, default_catalog, tcl_value
from .errors import ModelClientUnavailable, SchemaTooSmall

TONES = ("direct", "conversational", "polite", "brief")
DESIGN_SHARES = {"des": 0.33, "b14": 0.33, "leon2": 0.34}
MIN_PARAMS, MAX_PARAMS = 6, 10
SAMPLING = {"temperature": 0.7, "frequency_penalty": 0.7, "presence_penalty": 0.6}


@dataclass(frozen=True)
class ParamDescriptor:
    stage: str | None  # None for the flow-wide mandatory entries
    kind: str  # continuous | categorical
    low: float | None = None
    high: float | None = None
    options: tuple = ()
    mandatory: bool = False
    integer: bool = False
    low_open: bool = False
    key: str = ""


@dataclass(frozen=True)
class ParamSchema:
    entries: dict

    def __post_init__(self):
        for name, d in self.entries.items():
            if d.kind == "continuous" and not (d.low is not None and d.high is not None and d.low < d.high):
                raise ValueError(f"{name}: continuous entry needs low < high")
            if d.kind == "categorical" and len(d.options) < 2:
                raise ValueError(f"{name}: categorical entry needs at least two options")
        for must in ("design", "tech"):
            if must not in self.entries or not self.entries[must].mandatory:
                raise ValueError(f"schema must have a mandatory {must!r} entry")

    def stage_entries(self, stage) -> dict:
        return {n: d for n, d in self.entries.items() if d.stage == stage}

    @classmethod
    def from_catalog(cls, catalog: Catalog | None = None, designs=None) -> "ParamSchema":
        cat = catalog or default_catalog()
        entries = {
            "design": ParamDescriptor(None, "categorical", options=tuple(designs or DESIGN_SHARES), mandatory=True, key="design"),
            "tech": ParamDescriptor(None, "categorical", options=tuple(cat.technologies), mandatory=True, key="tech"),
        }
        for p in cat.params:
            if not p.sample:
                continue
            name = f"{p.stage}.{p.name}"
            if p.kind in ("real", "int"):
                entries[name] = ParamDescriptor(p.stage, "continuous", p.low, p.high, integer=p.kind == "int",
                                                low_open=p.low_open, key=p.key)
            elif p.kind == "bool":
                entries[name] = ParamDescriptor(p.stage, "categorical", options=(True, False), key=p.key)
            else:
                entries[name] = ParamDescriptor(p.stage, "categorical", options=tuple(p.options), key=p.key)
        return cls(entries)


@dataclass
class BenchmarkCase:
    case_id: str
    design: str
    stages: list
    ground_truth: dict
    tone: str = "direct"
    prompt: str = ""

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _sample_value(d: ParamDescriptor, rng: np.random.Generator):
    if d.kind == "categorical":
        return d.options[int(rng.integers(len(d.options)))]
    if d.integer:
        lo = math.floor(d.low) + (1 if d.low_open and d.low == math.floor(d.low) else 0)
        lo = max(lo, math.ceil(d.low))
        return int(rng.integers(lo, math.floor(d.high) + 1))
    v = round(float(rng.uniform(d.low, d.high)), 2)
    if d.low_open and v <= d.low:
        v = round(d.low + 0.01, 2)
    return min(v, d.high)


def sample_ground_truth(schema: ParamSchema, rng_seed, design=None, stages=None,
                        case_id="case-0000") -> BenchmarkCase:
    """Draw a ground-truth record; ``rng_seed`` may be an int or a SeedSequence."""
    rng = np.random.default_rng(rng_seed)
    if stages is None:
        stages = [STAGES[int(rng.integers(len(STAGES)))]]
    pool = [(n, d) for s in stages for n, d in schema.stage_entries(s).items()]
    high = min(MAX_PARAMS, 2 + len(pool))
    if high < MIN_PARAMS:
        raise SchemaTooSmall(f"stages {stages} offer {len(pool)} parameters; need {MIN_PARAMS - 2}")
    k = int(rng.integers(MIN_PARAMS, high + 1))
    picks = sorted(rng.choice(len(pool), size=k - 2, replace=False).tolist())
    if design is None:
        design = _sample_value(schema.entries["design"], rng)
    tech = _sample_value(schema.entries["tech"], rng)
    per_tool = {TOOL_NAMES[s]: {} for s in stages}
    for i in picks:
        name, d = pool[i]
        per_tool[TOOL_NAMES[d.stage]][d.key] = _sample_value(d, rng)
    tools = [TOOL_NAMES[s] for s in stages]
    if len(tools) == 1:
        truth = {"tool": tools[0], "params": {"design": design, "tech": tech, **per_tool[tools[0]]}}
    else:
        truth = {"tool": tools, "params": {"design": design, "tech": tech, **{t: per_tool[t] for t in tools}}}
    return BenchmarkCase(case_id, design, tools, truth)


def stage_params(case: BenchmarkCase) -> dict:
    """tool -> {key: value} without the flow-wide entries."""
    p = case.ground_truth["params"]
    if isinstance(case.ground_truth["tool"], str):
        return {case.ground_truth["tool"]: {k: v for k, v in p.items() if k not in ("design", "tech")}}
    return {t: dict(p[t]) for t in case.ground_truth["tool"]}


def param_count(case: BenchmarkCase) -> int:
    return 2 + sum(len(v) for v in stage_params(case).values())


# -- prompt rendering --------------------------------------------------------

_VERB = {
    "direct": {"synth": "Synthesize", "placement": "Run placement for", "cts": "Run clock tree synthesis for",
               "route": "Route"},
    "conversational": {"synth": "I need to synthesize", "placement": "I'd like to run placement for",
                       "cts": "I want to build the clock tree (cts) for", "route": "I need to route"},
    "polite": {"synth": "Could you please synthesize", "placement": "Could you please run placement for",
               "cts": "Could you please run cts for", "route": "Could you please route"},
    "brief": {"synth": "synth", "placement": "place", "cts": "cts", "route": "route"},
}


def _phrase(tool, key):
    spec = default_catalog().get(TOOL_TO_STAGE[tool], key)
    return spec.phrases[0] if spec.phrases else key.replace("_", " ")


def _clause(tone, phrase, value):
    if isinstance(value, bool):
        word = "enabled" if value else "disabled"
        return f"{phrase} {word}"
    v = tcl_value(value)
    return {
        "direct": f"{phrase} to {v}",
        "conversational": f"{phrase} of {v}",
        "polite": f"a {phrase} of {v}",
        "brief": f"{phrase} {v}",
    }[tone]


def render_hermetic(case: BenchmarkCase, tone: str) -> str:
    if tone not in TONES:
        raise ValueError(f"unknown tone {tone!r}")
    p = case.ground_truth["params"]
    design, tech = p["design"], p["tech"]
    parts = []
    for i, (tool, params) in enumerate(stage_params(case).items()):
        verb = _VERB[tone][tool]
        clauses = [_clause(tone, _phrase(tool, k), v) for k, v in params.items()]
        if tone == "brief":
            head = f"{verb} {design} {tech}" if i == 0 else verb
            parts.append(f"{head}: " + ", ".join(clauses) + "." if clauses else f"{head}.")
            continue
        target = f'design "{design}" on {tech}' if i == 0 else f'design "{design}"'
        listed = ", ".join(clauses)
        if not clauses:
            # a stage with nothing sampled is still named so the plan keeps it
            parts.append(f"{verb} {target}{'?' if tone == 'polite' else '.'}")
        elif tone == "direct":
            parts.append(f"{verb} {target}. Set {listed}.")
        elif tone == "conversational":
            parts.append(f"{verb} {target}. Let's go with {listed}.")
        else:
            parts.append(f"{verb} {target}? I would appreciate {listed}. Thank you!")
    return " ".join(parts)


def render_with_model(case: BenchmarkCase, tone: str, client) -> str:
    if client is None:
        raise ModelClientUnavailable("no model client configured")
    truth = json.dumps(case.ground_truth, sort_keys=True)
    messages = [
        {"role": "system", "content": (
            "You write requests that an engineer would send to a chip implementation assistant. "
            f"Write one request in a {tone} tone that asks for exactly this tool call, mentioning "
            "every parameter value. Reply with the request text only.")},
        {"role": "user", "content": truth},
    ]
    return client.chat(messages, **SAMPLING).strip()


def render_prompt(case: BenchmarkCase, tone: str, engine: str = "hermetic", client=None) -> str:
    if engine == "hermetic":
        return render_hermetic(case, tone)
    if engine == "model":
        return render_with_model(case, tone, client)
    raise ValueError(f"unknown engine {engine!r}")


# -- datasets ----------------------------------------------------------------

def design_quota(n: int, shares=DESIGN_SHARES) -> dict:
    """Largest-remainder apportionment of ``n`` cases over the designs."""
    if n < 1:
        raise ValueError("n must be at least 1")
    raw = {d: n * s for d, s in shares.items()}
    counts = {d: math.floor(v) for d, v in raw.items()}
    left = n - sum(counts.values())
    order = sorted(shares, key=lambda d: (-(raw[d] - counts[d]), list(shares).index(d)))
    for d in order[:left]:
        counts[d] += 1
    return counts


def generate_dataset(n: int, schema: ParamSchema | None = None, seed: int = 0, engine: str = "hermetic",
                     client=None, multi_stage: bool = False) -> list[BenchmarkCase]:
    schema = schema or ParamSchema.from_catalog()
    root = np.random.SeedSequence(seed)
    rng = np.random.default_rng(root)
    designs = [d for d, c in design_quota(n).items() for _ in range(c)]
    designs = [designs[i] for i in rng.permutation(n)]
    cases = []
    for i, child in enumerate(root.spawn(n)):
        crng = np.random.default_rng(child)
        tone = TONES[int(crng.integers(len(TONES)))]
        if multi_stage:
            a = int(crng.integers(len(STAGES)))
            b = int(crng.integers(a, len(STAGES)))
            stages = list(STAGES[a:b + 1])
        else:
            stages = [STAGES[int(crng.integers(len(STAGES)))]]
        case = sample_ground_truth(schema, crng.integers(2**63), design=designs[i], stages=stages,
                                   case_id=f"case-{i:04d}")
        case.tone = tone
        case.prompt = render_prompt(case, tone, engine, client)
        cases.append(case)
    return cases


def write_dataset(cases, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for c in cases:
            f.write(json.dumps(c.to_dict(), sort_keys=True) + "\n")


def read_dataset(path) -> list[BenchmarkCase]:
    with Path(path).open(encoding="utf-8") as f:
        return [BenchmarkCase.from_dict(json.loads(line)) for line in f if line.strip()]
