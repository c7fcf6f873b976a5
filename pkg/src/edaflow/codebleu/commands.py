"""EDA command database and stage detection."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from .._data import load_json
from ..errors import ConfigInvalid

STAGES = ("synthesis", "placement", "cts", "route")
TCL_KEYWORDS = frozenset({"set", "proc", "if", "foreach", "while"})
DETECT_THRESHOLD = 0.4
FALLBACK_STAGE = "synthesis"


@dataclass(frozen=True)
class EdaCommandDb:
    entries: Mapping[str, str] = field(default_factory=dict)
    version: str = "1.0"

    def __post_init__(self):
        entries = dict(self.entries)
        bad = {k: v for k, v in entries.items() if v not in STAGES}
        if bad:
            raise ConfigInvalid(f"unknown command categories: {sorted(set(bad.values()))}")
        object.__setattr__(self, "entries", entries)

    @property
    def total_count(self) -> int:
        return len(self.entries)

    def __contains__(self, name):
        return name in self.entries

    def category(self, name) -> str | None:
        return self.entries.get(name)

    def by_stage(self, stage) -> list[str]:
        return sorted(k for k, v in self.entries.items() if v == stage)

    def extended(self, extra: Mapping[str, str]) -> "EdaCommandDb":
        return EdaCommandDb({**self.entries, **extra}, self.version)

    @classmethod
    def from_dict(cls, doc) -> "EdaCommandDb":
        if not isinstance(doc, dict) or "commands" not in doc:
            raise ConfigInvalid("command database needs a 'commands' map")
        return cls(doc["commands"], str(doc.get("version", "1.0")))

    @classmethod
    def from_file(cls, path) -> "EdaCommandDb":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))


@lru_cache(maxsize=None)
def default_db() -> EdaCommandDb:
    return EdaCommandDb.from_dict(load_json("eda_commands.json"))


def detect_stage(script: str, db: EdaCommandDb | None = None,
                 threshold: float = DETECT_THRESHOLD, fallback: str = FALLBACK_STAGE):
    """Return (stage, confidence) from the categories of the EDA commands used."""
    from .dfg import extract_dfg
    from .tokenizer import tokenize

    db = db or default_db()
    graph = extract_dfg(tokenize(script, strict=False), db)
    counts = dict.fromkeys(STAGES, 0)
    for node in graph.nodes:
        if node.relation == "comesFrom":
            counts[db.category(node.name)] += 1
    total = sum(counts.values())
    if total == 0:
        return fallback, 0.0
    # max() keeps the first of equal counts, i.e. canonical stage order
    top = max(STAGES, key=lambda s: counts[s])
    confidence = counts[top] / total
    if confidence < threshold:
        return fallback, 0.0
    return top, confidence
