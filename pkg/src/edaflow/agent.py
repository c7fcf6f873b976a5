"""Natural-language front end: extraction, planning, conflicts and execution.

A prompt goes through ``extract_parameters`` (rule engine, or a configured
language model with the same output shape), ``decompose`` into a
``ToolPlan``, ``detect_conflicts`` and finally ``execute_plan``, which calls
the stage services in canonical order and threads version labels between
them.
"""
from __future__ import annotations

import json
import re
import threading
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .catalog import STAGES, TOOL_NAMES, TOOL_TO_STAGE, default_catalog
from .errors import (
    EdaFlowError,
    EmptyPrompt,
    ModelClientUnavailable,
    NoStageDetected,
    PlanConflict,
    SessionUnknown,
    StageFailed,
)
from .services import make_impl_ver

TOOLS = tuple(TOOL_NAMES[s] for s in STAGES)

# -- lexicon -----------------------------------------------------------------

_STAGE_VERBS = {
    "synthesis": re.compile(r"(?<!clock tree )(?<!clock-tree )(?:\bsynthe\w*|\bsynth\b)"),
    "placement": re.compile(r"\bplac(?:e|ed|es|ing|ement|er)\b|\bfloor\s?plan\w*"),
    "cts": re.compile(r"(?<![\w-])cts\b|\bclock[\s-]tree\b"),
    "route": re.compile(r"\brout(?:e|es|ed|ing|er)\b"),
}

EFFORT_SYNONYMS = {
    "minimal": "low", "minimum": "low", "light": "low", "lowest": "low",
    "moderate": "medium", "average": "medium", "mid": "medium", "normal": "medium",
    "maximum": "high", "max": "high", "aggressive": "high", "heavy": "high", "highest": "high",
}
_EFFORT_WORDS = {"low", "medium", "high", *EFFORT_SYNONYMS}

_UNIT_SCALE = {("ns", "ps"): 1e-3, ("pf", "ff"): 1e-3}
_NUM_RE = re.compile(
    r"(?<![\w.])([-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)\s*(ns|ps|%|um|pf|ff)?(?![\w.])"
)
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z0-9_-]*")
_QUOTED_RE = re.compile(r"\"([^\"]+)\"|'([^']+)'")
_SENTENCE_RE = re.compile(r"\.(?=\s|$)|[!?\n]")
_CLAUSE_RE = re.compile(r",|;|:|\band\b|\bthen\b|\bwith\b|\bplus\b|\balso\b", re.I)
_FILLER = {"to", "of", "is", "be", "at", "as", "=", "named", "called", "set", "use", "using"}
_SYN_VER_RE = re.compile(
    r"\b(?:synthesis|syn)[\s_-]?(?:version|ver)\s*[=:]?\s*[\"']?([A-Za-z0-9][\w.-]*?)[\"']?(?=[\s,;]|\.(?:\s|$)|$)", re.I)
_IMPL_VER_RE = re.compile(
    r"\b(?:implementation|impl)[\s_-]?(?:version|ver)\s*[=:]?\s*[\"']?([A-Za-z0-9][\w.-]*?)[\"']?(?=[\s,;]|\.(?:\s|$)|$)", re.I)
_SPLIT_WORDS = re.compile(r"\b(?:and|with|then|plus|also)\b")


def _phrase_pattern(phrase):
    parts = [re.escape(p) for p in re.split(r"[\s_-]+", phrase.lower()) if p]
    return re.compile(r"(?<![\w-])" + r"[\s_-]+".join(parts) + r"(?![\w-])")


@dataclass(frozen=True)
class _Lexicon:
    entries: tuple  # (phrase, pattern, specs) sorted longest first
    designs: tuple
    technologies: tuple


_LEXICON = None
_LEXICON_LOCK = threading.Lock()


def lexicon() -> _Lexicon:
    global _LEXICON
    with _LEXICON_LOCK:
        if _LEXICON is None:
            cat = default_catalog()
            by_phrase: dict[str, list] = {}
            for spec in cat.params:
                names = list(spec.phrases)
                for ident in (spec.key, spec.name):
                    p = ident.replace("_", " ")
                    # identifiers like route_with_eco would be cut by the clause splitter
                    if not _SPLIT_WORDS.search(p):
                        names.append(p)
                for p in names:
                    lst = by_phrase.setdefault(p.lower(), [])
                    if spec not in lst:
                        lst.append(spec)
            entries = sorted(((p, _phrase_pattern(p), tuple(s)) for p, s in by_phrase.items()),
                             key=lambda e: (-len(e[0]), e[0]))
            _LEXICON = _Lexicon(tuple(entries), cat.designs, cat.technologies)
        return _LEXICON


# -- extraction --------------------------------------------------------------

@dataclass
class Extraction:
    """Structured reading of one prompt.

    ``params`` maps tool name to ``{key: value}``; ``assignments`` keeps every
    recognised (tool, key, value) in prompt order, duplicates included.
    """

    params: dict = field(default_factory=dict)
    unresolved: list = field(default_factory=list)
    design: str | None = None
    tech: str | None = None
    stages: list = field(default_factory=list)  # stages named by a verb
    versions: dict = field(default_factory=dict)
    assignments: list = field(default_factory=list)

    def __iter__(self):
        yield self.params
        yield self.unresolved

    def add(self, stage, key, value):
        tool = TOOL_NAMES[stage]
        self.assignments.append((tool, key, value))
        self.params.setdefault(tool, {}).setdefault(key, value)


def _blank(text, start, end):
    return text[:start] + " " * (end - start) + text[end:]


def _find_design(text, designs):
    known = {d.lower(): d for d in designs}
    m = re.search(r"\bdesign\s+(?:\"([^\"]+)\"|'([^']+)'|([A-Za-z_][\w.-]*))", text, re.I)
    if m:
        name = m.group(1) or m.group(2) or m.group(3)
        if m.group(3) is None or name.lower() in known or re.search(r"\d", name):
            name = known.get(name.lower(), name)
            return name, m.start(1) if m.group(1) else (m.start(2) if m.group(2) else m.start(3)), \
                m.end(1) if m.group(1) else (m.end(2) if m.group(2) else m.end(3))
    for m in _QUOTED_RE.finditer(text):
        name = m.group(1) or m.group(2)
        if name.lower() in known:
            return known[name.lower()], m.start(), m.end()
    for d in designs:
        m = re.search(rf"(?<![\w-]){re.escape(d)}(?![\w-])", text, re.I)
        if m:
            return d, m.start(), m.end()
    return None


def _parse_number(text, unit, spec):
    num = float(text)
    if unit == "%" and spec.high is not None and spec.high <= 1:
        num /= 100
    elif unit and spec.unit:
        for (base, small), scale in _UNIT_SCALE.items():
            if spec.unit == base and unit == small:
                num *= scale
    if spec.kind == "int" or (re.fullmatch(r"[-+]?\d+", text) and unit in (None, "ns", "um", "pf")):
        if num == int(num):
            return int(num)
    return round(num, 12)


def _enum_words(spec):
    words = {o: o for o in spec.options}
    if {"low", "medium", "high"} <= set(spec.options):
        for w, v in EFFORT_SYNONYMS.items():
            words.setdefault(w, v)
    return words


def _pick(candidates, prefer_before):
    """candidates: list of (start, end, value, side)."""
    before = [c for c in candidates if c[3] == "before"]
    after = [c for c in candidates if c[3] == "after"]
    # nearest to the phrase on each side
    before.sort(key=lambda c: -c[0])
    after.sort(key=lambda c: c[0])
    order = (before + after) if prefer_before else (after + before)
    return order[0] if order else None


def _value_candidates(spec, clause, lo, start, end, hi, taken):
    """Possible values for ``spec`` in clause[lo:start] (before) and clause[end:hi] (after)."""
    out = []

    def free(a, b):
        return not any(a < tb and ta < b for ta, tb in taken)

    for side, a, b in (("before", lo, start), ("after", end, hi)):
        window = clause[a:b]
        if spec.continuous:
            for m in _NUM_RE.finditer(window):
                s, e = a + m.start(), a + m.end()
                if free(s, e):
                    out.append((s, e, _parse_number(m.group(1), m.group(2), spec), side))
        elif spec.kind == "enum":
            words = _enum_words(spec)
            for m in _WORD_RE.finditer(window):
                w = m.group(0).lower()
                if w in words and free(a + m.start(), a + m.end()):
                    out.append((a + m.start(), a + m.end(), words[w], side))
        elif spec.kind == "bool":
            for m in _WORD_RE.finditer(window):
                w = m.group(0).lower()
                if free(a + m.start(), a + m.end()):
                    if w in ("true", "on", "yes", "enabled", "enable"):
                        out.append((a + m.start(), a + m.end(), True, side))
                    elif w in ("false", "off", "no", "disabled", "disable", "without"):
                        out.append((a + m.start(), a + m.end(), False, side))
            for m in re.finditer(r"(?<![\w.])[01](?![\w.])", window):
                if free(a + m.start(), a + m.end()):
                    out.append((a + m.start(), a + m.end(), m.group(0) == "1", side))
        elif side == "after":
            q = _QUOTED_RE.search(window)
            if q:
                out.append((a + q.start(), a + q.end(), q.group(1) or q.group(2), side))
            else:
                for m in _WORD_RE.finditer(window):
                    if m.group(0).lower() not in _FILLER and free(a + m.start(), a + m.end()):
                        out.append((a + m.start(), a + m.end(), m.group(0), side))
                        break
    return out


def _stage_context(pos, verbs, cands):
    """Resolve which of ``cands`` (stages) a phrase at ``pos`` belongs to."""
    before = [s for p, s in verbs if p <= pos]
    after = [s for p, s in verbs if p > pos]
    for s in reversed(before):
        if s in cands:
            return s
    for s in after:
        if s in cands:
            return s
    return None


def extract_parameters(prompt: str) -> Extraction:
    """Deterministic rule engine."""
    if prompt is None or not prompt.strip():
        raise EmptyPrompt("prompt is empty")
    lex = lexicon()
    ex = Extraction()
    text = prompt

    for rx, key in ((_SYN_VER_RE, "syn_ver"), (_IMPL_VER_RE, "impl_ver")):
        for m in rx.finditer(text):
            ex.versions.setdefault(key, m.group(1).rstrip("."))
            text = _blank(text, m.start(), m.end())

    found = _find_design(text, lex.designs)
    if found:
        ex.design = found[0]
        text = _blank(text, found[1], found[2])
    for t in lex.technologies:
        m = re.search(rf"(?<![\w-]){re.escape(t)}(?![\w-])", text, re.I)
        if m:
            ex.tech = t
            text = _blank(text, m.start(), m.end())
            break

    low = text.lower()
    verbs = sorted((m.start(), s) for s, rx in _STAGE_VERBS.items() for m in rx.finditer(low))
    ex.stages = [s for s in STAGES if any(v == s for _, v in verbs)]

    # sentences, then clauses; positions stay relative to the whole prompt
    spans = []
    pos = 0
    for m in _SENTENCE_RE.finditer(low):
        spans.append((pos, m.start()))
        pos = m.end()
    spans.append((pos, len(low)))
    clauses = []
    for a, b in spans:
        p = a
        for m in _CLAUSE_RE.finditer(low, a, b):
            clauses.append((p, m.start()))
            p = m.end()
        clauses.append((p, b))

    for ca, cb in clauses:
        clause = low[ca:cb]
        if not clause.strip():
            continue
        hits = []
        for phrase, rx, specs in lex.entries:
            for m in rx.finditer(clause):
                if not any(m.start() < e and s < m.end() for s, e, *_ in hits):
                    hits.append((m.start(), m.end(), phrase, specs))
        hits.sort()
        taken = [(s, e) for s, e, *_ in hits]
        for i, (s, e, phrase, specs) in enumerate(hits):
            lo = hits[i - 1][1] if i else 0
            hi = hits[i + 1][0] if i + 1 < len(hits) else len(clause)
            stages = {sp.stage for sp in specs}
            if len(stages) == 1:
                stage = next(iter(stages))
            else:
                stage = _stage_context(ca + s, verbs, stages)
                if stage is None:
                    ex.unresolved.append((phrase, "ambiguous stage: " + "/".join(sorted(stages))))
                    continue
            spec = next(sp for sp in specs if sp.stage == stage)
            cands = _value_candidates(spec, clause, lo, s, e, hi, taken)
            pick = _pick(cands, prefer_before=spec.kind in ("enum", "bool"))
            if pick is None:
                if spec.kind == "bool":
                    ex.add(stage, spec.key, True)  # "enable X" style mention
                    continue
                ex.unresolved.append((spec.key, "no value given"))
                continue
            taken.append((pick[0], pick[1]))
            ex.add(stage, spec.key, pick[2])
        # leftover numbers or effort words are constraints nobody claimed
        rest = clause
        for s, e in taken:
            rest = _blank(rest, s, e)
        words = {w.lower() for w in _WORD_RE.findall(rest)}
        if _NUM_RE.search(rest) or words & _EFFORT_WORDS:
            ex.unresolved.append((prompt[ca:cb].strip(), "unrecognized constraint"))
    return ex


# -- plans -------------------------------------------------------------------

@dataclass
class ToolPlan:
    stages: list
    per_stage_params: dict
    session_id: str | None = None
    unresolved: list = field(default_factory=list)
    design: str | None = None
    tech: str | None = None
    versions: dict = field(default_factory=dict)
    assignments: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["unresolved"] = [list(u) for u in self.unresolved]
        d["assignments"] = [list(a) for a in self.assignments]
        return d


def decompose(extraction: Extraction, session_id=None, design=None, tech=None) -> ToolPlan:
    """Order the stages canonically and fill gaps so the plan is contiguous."""
    named = set(extraction.stages) | {TOOL_TO_STAGE[t] for t in extraction.params}
    if not named:
        raise NoStageDetected("no flow stage or stage parameter found in the prompt")
    idx = [STAGES.index(s) for s in named]
    stages = list(STAGES[min(idx):max(idx) + 1])
    design = extraction.design or design
    per_stage = {}
    for s in stages:
        tool = TOOL_NAMES[s]
        params = {"design": design} if design else {}
        params.update(extraction.params.get(tool, {}))
        per_stage[tool] = params
    return ToolPlan(
        stages=[TOOL_NAMES[s] for s in stages],
        per_stage_params=per_stage,
        session_id=session_id,
        unresolved=list(extraction.unresolved),
        design=design,
        tech=extraction.tech or tech,
        versions=dict(extraction.versions),
        assignments=list(extraction.assignments),
    )


@dataclass(frozen=True)
class Conflict:
    kind: str  # duplicate | range | dependency
    stage: str
    param: str
    detail: str

    def describe(self):
        return f"{self.kind} conflict in {self.stage}.{self.param}: {self.detail}"

    def to_dict(self):
        return asdict(self)


_UPSTREAM = {"placement": "synthesis", "cts": "placement", "route": "cts"}


def _upstream_version(stage, plan, session, services):
    """Version label the first stage of a plan would build on, or None."""
    need = _UPSTREAM[stage]
    key = "syn_ver" if stage == "placement" else "impl_ver"
    if plan.versions.get(key):
        return plan.versions[key]
    if session is not None and session.design == plan.design:
        v = session.versions.get(TOOL_NAMES[need])
        if v:
            return v
    if services is not None and plan.design:
        return services.latest_version(plan.design, need)
    return None


def detect_conflicts(plan: ToolPlan, session=None, services=None) -> list[Conflict]:
    cat = default_catalog()
    out: list[Conflict] = []
    seen: dict[tuple, Any] = {}
    for tool, key, value in plan.assignments:
        prev = seen.setdefault((tool, key), value)
        if prev != value:
            out.append(Conflict("duplicate", tool, key, f"given as both {prev!r} and {value!r}"))
    for tool, params in plan.per_stage_params.items():
        stage = TOOL_TO_STAGE[tool]
        for key, value in params.items():
            if key == "design":
                continue
            spec = cat.get(stage, key)
            if spec is None:
                out.append(Conflict("range", tool, key, "unknown parameter"))
                continue
            try:
                spec.validate(value)
            except ValueError as e:
                out.append(Conflict("range", tool, key, str(e)))
    if not plan.design:
        out.append(Conflict("dependency", plan.stages[0], "design", "no design named in prompt or session"))
        return out
    first = TOOL_TO_STAGE[plan.stages[0]]
    if first != "synthesis" and _upstream_version(first, plan, session, services) is None:
        need = _UPSTREAM[first]
        out.append(Conflict("dependency", plan.stages[0], "syn_ver" if first == "placement" else "impl_ver",
                            f"needs a completed {need} run and none is in the plan, session or workspace"))
    return out


# -- sessions ----------------------------------------------------------------

@dataclass
class SessionContext:
    session_id: str
    design: str | None = None
    tech: str | None = None
    plans: list = field(default_factory=list)
    versions: dict = field(default_factory=dict)  # tool -> last label

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


class SessionStore:
    """In-memory session map, optionally mirrored to ``<dir>/<id>.json``."""

    def __init__(self, directory=None):
        self.dir = Path(directory) if directory else None
        self._sessions: dict[str, SessionContext] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def create(self, session_id=None) -> SessionContext:
        with self._guard:
            sid = session_id or uuid.uuid4().hex[:12]
            ctx = SessionContext(sid)
            self._sessions[sid] = ctx
            self._locks.setdefault(sid, threading.Lock())
        self.save(ctx)
        return ctx

    def get(self, session_id) -> SessionContext:
        with self._guard:
            if session_id in self._sessions:
                return self._sessions[session_id]
            path = self._path(session_id)
            if path is not None and path.is_file():
                ctx = SessionContext.from_dict(json.loads(path.read_text("utf-8")))
                self._sessions[session_id] = ctx
                self._locks.setdefault(session_id, threading.Lock())
                return ctx
        raise SessionUnknown(f"unknown session {session_id!r}")

    def lock(self, session_id) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id):
        if self.dir is None or not re.fullmatch(r"[A-Za-z0-9_.-]+", session_id or ""):
            return None
        return self.dir / f"{session_id}.json"

    def save(self, ctx: SessionContext):
        path = self._path(ctx.session_id)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(ctx.to_dict(), indent=1, default=str), "utf-8")
        tmp.replace(path)


# -- execution ---------------------------------------------------------------

@dataclass
class StageResult:
    tool: str
    params: dict
    tcl_script: str
    reports: list
    version: str = ""
    status: str = "success"
    provenance: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    log: str = ""

    def to_dict(self):
        return asdict(self)


@dataclass
class AgentResponse:
    status: str
    tools_used: list
    results: list
    session_id: str | None = None
    unresolved: list = field(default_factory=list)
    error: dict | None = None

    def to_dict(self):
        d = {
            "status": self.status,
            "tools_used": list(self.tools_used),
            "results": [r.to_dict() for r in self.results],
            "session_id": self.session_id,
            "unresolved": [list(u) for u in self.unresolved],
        }
        if self.error is not None:
            d["error"] = self.error
        return d


def _service_params(stage, params):
    cat = default_catalog()
    out = {}
    for key, value in params.items():
        if key == "design":
            continue
        out[cat.get(stage, key).name] = value
    return out


def _syn_version(plan, session, services):
    if plan.versions.get("syn_ver"):
        return plan.versions["syn_ver"]
    if session.design == plan.design and session.versions.get("synth"):
        return session.versions["synth"]
    return services.next_syn_version(plan.design)


def execute_plan(plan: ToolPlan, session: SessionContext, services, store: SessionStore | None = None) -> AgentResponse:
    """Run the plan stage by stage; stop at the first failure."""
    if plan.session_id is not None and plan.session_id != session.session_id:
        raise SessionUnknown(f"plan belongs to session {plan.session_id!r}")
    design, tech = plan.design, plan.tech or session.tech or "FreePDK45"
    response = AgentResponse("success", [], [], session.session_id, list(plan.unresolved))
    syn_ver = impl_ver = None
    for tool in plan.stages:
        stage = TOOL_TO_STAGE[tool]
        params = plan.per_stage_params.get(tool, {})
        fields = _service_params(stage, params)
        base = {"design": design, "tech": tech}
        if stage == "synthesis":
            syn_ver = _syn_version(plan, session, services)
            req = {**base, "syn_version": syn_ver, "top_name": design, **fields}
        elif stage == "placement":
            syn_ver = syn_ver or _upstream_version("placement", plan, session, services)
            req = {**base, "syn_ver": syn_ver, "g_idx": 0, "p_idx": 0, "stage_params": fields}
        else:
            impl_ver = impl_ver or _upstream_version(stage, plan, session, services)
            req = {**base, "impl_ver": impl_ver}
            req.update({"route_params": fields, "collect_artifacts": True} if stage == "route" else fields)
        if stage == "placement":
            impl_ver = make_impl_ver(syn_ver, 0, 0)
        response.tools_used.append(tool)
        try:
            sr = services.run(stage, req)
        except EdaFlowError as e:
            failed = getattr(e, "response", None)
            response.results.append(StageResult(
                tool, params, getattr(failed, "rendered_tcl", ""),
                [Path(p).name for p in getattr(failed, "report_paths", [])],
                getattr(failed, "version", ""), "error",
                log=getattr(failed, "log_excerpt", "") or str(e)))
            response.status = "error"
            response.error = e.to_dict()
            _record(session, plan, response, store)
            raise StageFailed(tool, response, e) from e
        response.results.append(StageResult(
            tool, params, sr.rendered_tcl, [Path(p).name for p in sr.report_paths],
            sr.version, sr.status, dict(sr.provenance), list(sr.artifacts)))
        session.versions[tool] = sr.version
        if stage == "synthesis":
            syn_ver = sr.version
        elif stage == "placement":
            impl_ver = sr.version
    _record(session, plan, response, store)
    return response


def _record(session, plan, response, store):
    session.design = plan.design or session.design
    session.tech = plan.tech or session.tech
    session.plans.append({"stages": list(plan.stages), "status": response.status,
                          "versions": {r.tool: r.version for r in response.results}})
    if store is not None:
        store.save(session)


# -- model engine ------------------------------------------------------------

_SYSTEM_PROMPT = (
    "You turn requests for a digital implementation flow into JSON. Reply with one JSON object: "
    '{"design": str|null, "tech": str|null, "stages": [subset of "synth","placement","cts","route"], '
    '"params": {tool: {parameter: value}}, "unresolved": [[text, reason]], '
    '"versions": {"syn_ver"?: str, "impl_ver"?: str}}. Known parameters per tool: '
)


def _schema_hint():
    cat = default_catalog()
    parts = []
    for s in STAGES:
        keys = ", ".join(f"{p.key} ({p.describe_range()})" for p in cat.stage_params(s).values())
        parts.append(f"{TOOL_NAMES[s]}: {keys}")
    return "; ".join(parts)


def extract_with_model(prompt: str, client) -> Extraction:
    if prompt is None or not prompt.strip():
        raise EmptyPrompt("prompt is empty")
    doc = client.chat_json([
        {"role": "system", "content": _SYSTEM_PROMPT + _schema_hint()},
        {"role": "user", "content": prompt},
    ], temperature=0)
    ex = Extraction(design=doc.get("design"), tech=doc.get("tech"),
                    versions=dict(doc.get("versions") or {}))
    cat = default_catalog()
    for tool in doc.get("stages") or []:
        if tool in TOOL_TO_STAGE:
            ex.stages.append(TOOL_TO_STAGE[tool])
    for tool, params in (doc.get("params") or {}).items():
        if tool not in TOOL_TO_STAGE:
            ex.unresolved.append((tool, "unknown tool"))
            continue
        stage = TOOL_TO_STAGE[tool]
        for key, value in (params or {}).items():
            if key == "design":
                continue
            spec = cat.get(stage, key)
            if spec is None:
                ex.unresolved.append((key, "unknown parameter"))
            else:
                ex.add(stage, spec.key, value)
    ex.unresolved.extend(tuple(u) for u in doc.get("unresolved") or [])
    ex.stages = [s for s in STAGES if s in ex.stages]
    return ex


# -- front door --------------------------------------------------------------

class Orchestrator:
    """Ties extraction, planning and execution to a services backend.

    ``services`` needs ``run(stage, request)``, ``latest_version(design,
    stage)`` and ``next_syn_version(design)``; both the in-process
    ``StageServices`` and the HTTP client provide them.
    """

    def __init__(self, services, sessions: SessionStore | None = None, llm=None):
        self.services = services
        self.sessions = sessions or SessionStore()
        self.llm = llm

    def extract(self, prompt):
        if self.llm is not None:
            try:
                return extract_with_model(prompt, self.llm)
            except ModelClientUnavailable:
                pass
        return extract_parameters(prompt)

    def plan(self, prompt, session: SessionContext | None = None) -> ToolPlan:
        ex = self.extract(prompt)
        return decompose(ex, session and session.session_id,
                         design=session and session.design, tech=session and session.tech)

    def run(self, prompt, session_id=None) -> AgentResponse:
        session = self.sessions.get(session_id) if session_id else self.sessions.create()
        with self.sessions.lock(session.session_id):
            plan = self.plan(prompt, session)
            conflicts = detect_conflicts(plan, session, self.services)
            if conflicts:
                raise PlanConflict(conflicts)
            return execute_plan(plan, session, self.services, self.sessions)
