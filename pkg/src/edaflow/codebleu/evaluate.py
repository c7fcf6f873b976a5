"""Stage-weighted CodeBLEU."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .commands import STAGES, EdaCommandDb, default_db, detect_stage
from .dfg import extract_dfg
from .match import (
    KEYWORD_WEIGHT,
    dataflow_match,
    line_match,
    ngram_match,
    weighted_ngram_match,
)
from .tokenizer import tokenize


@dataclass(frozen=True)
class CodeBleuWeights:
    ngram: float
    weighted_ngram: float
    syntax: float
    dataflow: float

    def __post_init__(self):
        vals = self.as_tuple()
        if any(v < 0 for v in vals):
            raise ValueError(f"negative weight in {vals}")
        if abs(math.fsum(vals) - 1.0) > 1e-12:
            raise ValueError(f"weights {vals} do not sum to 1")

    def as_tuple(self):
        return (self.ngram, self.weighted_ngram, self.syntax, self.dataflow)

    def combine(self, ngram, weighted_ngram, syntax, dataflow) -> float:
        return math.fsum(w * c for w, c in zip(self.as_tuple(), (ngram, weighted_ngram, syntax, dataflow)))


STAGE_WEIGHTS = {
    "synthesis": CodeBleuWeights(0.20, 0.30, 0.25, 0.25),
    "placement": CodeBleuWeights(0.15, 0.25, 0.30, 0.30),
    "cts": CodeBleuWeights(0.20, 0.25, 0.30, 0.25),
    "route": CodeBleuWeights(0.20, 0.25, 0.25, 0.30),
}
assert set(STAGE_WEIGHTS) == set(STAGES)


@dataclass(frozen=True)
class CodeBleuReport:
    stage: str
    confidence: float
    ngram: float
    weighted_ngram: float
    syntax: float
    dataflow: float
    total: float
    weights: CodeBleuWeights
    flags: tuple = field(default=())

    @property
    def components(self):
        return {"ngram": self.ngram, "weighted_ngram": self.weighted_ngram,
                "syntax": self.syntax, "dataflow": self.dataflow}

    def to_dict(self):
        return {
            "stage_detected": {"stage": self.stage, "confidence": self.confidence},
            "components": self.components,
            "total": self.total,
            "weights": asdict(self.weights),
            "flags": list(self.flags),
        }


def report_from_components(stage, ngram, weighted_ngram, syntax, dataflow,
                           confidence=1.0, flags=()) -> CodeBleuReport:
    w = STAGE_WEIGHTS[stage]
    return CodeBleuReport(stage, confidence, ngram, weighted_ngram, syntax, dataflow,
                          w.combine(ngram, weighted_ngram, syntax, dataflow), w, tuple(flags))


def evaluate(reference: str, candidate: str, stage: str | None = None,
             db: EdaCommandDb | None = None, max_n: int = 4,
             lam: float = KEYWORD_WEIGHT) -> CodeBleuReport:
    """Score a candidate script against a reference.

    Without ``stage`` the stage is detected from the reference.
    """
    db = db or default_db()
    if stage is None:
        stage, confidence = detect_stage(reference, db)
    elif stage not in STAGE_WEIGHTS:
        raise ValueError(f"unknown stage {stage!r}")
    else:
        confidence = 1.0
    ref = tokenize(reference, strict=False)
    cand = tokenize(candidate, strict=False)
    flags = []
    lm = line_match(reference, candidate)
    if lm.empty_reference:
        flags.append("empty-reference-lines")
    ref_g, cand_g = extract_dfg(ref, db), extract_dfg(cand, db)
    if not ref_g.nodes and cand_g.nodes:
        flags.append("empty-reference-dfg")
    return report_from_components(
        stage,
        ngram_match(ref, cand, max_n),
        weighted_ngram_match(ref, cand, db, max_n, lam),
        lm.score,
        dataflow_match(ref_g, cand_g),
        confidence,
        flags,
    )
