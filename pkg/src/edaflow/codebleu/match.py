"""The four CodeBLEU components, each on a 0-100 scale."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .commands import TCL_KEYWORDS, EdaCommandDb, default_db
from .dfg import DataFlowGraph
from .tokenizer import TclTokenStream, tokenize

KEYWORD_WEIGHT = 4.0


def _words(x) -> list[str]:
    if isinstance(x, str):
        x = tokenize(x, strict=False)
    if isinstance(x, TclTokenStream):
        return x.words()
    return list(x)


def _ngrams(words, n):
    return Counter(tuple(words[i:i + n]) for i in range(len(words) - n + 1))


def _bleu(ref, cand, max_n, weight=None):
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    if not cand or not ref:
        return 0.0
    orders = min(max_n, len(cand))
    log_sum = 0.0
    for n in range(1, orders + 1):
        rc = _ngrams(ref, n)
        cc = _ngrams(cand, n)
        num = den = 0.0
        for g, c in cc.items():
            w = weight(g) if weight else 1.0
            num += w * min(c, rc.get(g, 0))
            den += w * c
        if num == 0:
            return 0.0
        log_sum += math.log(num / den)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1 - len(ref) / len(cand))
    return 100.0 * bp * math.exp(log_sum / orders)


def ngram_match(reference, candidate, max_n: int = 4) -> float:
    """Clipped n-gram precision, geometric mean over orders, brevity penalty."""
    return _bleu(_words(reference), _words(candidate), max_n)


def keyword_weights(db: EdaCommandDb | None = None, lam: float = KEYWORD_WEIGHT):
    db = db or default_db()

    def token_weight(tok):
        return lam if (tok in db or tok in TCL_KEYWORDS) else 1.0

    return token_weight


def weighted_ngram_match(reference, candidate, db: EdaCommandDb | None = None,
                         max_n: int = 4, lam: float = KEYWORD_WEIGHT) -> float:
    """As ngram_match, but each n-gram counts with the largest weight of its tokens."""
    tw = keyword_weights(db, lam)
    return _bleu(_words(reference), _words(candidate), max_n,
                 weight=lambda g: max(tw(t) for t in g))


def normalize_lines(script: str) -> list[str]:
    out = []
    for line in script.splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        cut = s.find(";#")
        if cut >= 0:
            s = s[:cut].rstrip()
        if s:
            out.append(s)
    return out


@dataclass(frozen=True)
class LineMatch:
    matched: int
    total: int

    @property
    def empty_reference(self):
        return self.total == 0

    @property
    def score(self):
        return 100.0 * self.matched / self.total if self.total else 0.0


def line_match(reference: str, candidate: str) -> LineMatch:
    ref = Counter(normalize_lines(reference))
    cand = Counter(normalize_lines(candidate))
    matched = sum(min(c, cand.get(line, 0)) for line, c in ref.items())
    return LineMatch(matched, sum(ref.values()))


def syntax_match(reference: str, candidate: str) -> float:
    """Share of reference lines found verbatim in the candidate (clipped)."""
    return line_match(reference, candidate).score


def corpus_syntax_match(pairs) -> float:
    """Sum of matching lines over sum of reference lines across (ref, cand) pairs."""
    matched = total = 0
    for ref, cand in pairs:
        m = line_match(ref, cand)
        matched += m.matched
        total += m.total
    return 100.0 * matched / total if total else 0.0


def dataflow_match(ref_graph: DataFlowGraph, cand_graph: DataFlowGraph) -> float:
    ref = Counter(ref_graph.edges())
    cand = Counter(cand_graph.edges())
    total = sum(ref.values())
    if total == 0:
        return 100.0 if not cand else 0.0
    matched = sum(min(c, cand.get(e, 0)) for e, c in ref.items())
    return 100.0 * matched / total
