"""Dataflow graph extraction for TCL.

Each node is ``(name, idx, relation, source_names, source_indices)``.
Assignments (``set``, ``incr``, ``append``, ``lappend``, ``foreach`` loop
variables) give ``computedFrom`` nodes whose sources are the variables read
by the value; every occurrence of a database command gives a ``comesFrom``
node. Bodies of ``proc``, ``if``, ``for``, ``foreach``, ``while`` and ``catch``
are walked with the same rules, and command substitutions are visited before
the command that contains them, matching evaluation order.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple

from .commands import EdaCommandDb, default_db
from .tokenizer import BRACE, TclTokenStream, tokenize

COMPUTED = "computedFrom"
COMES = "comesFrom"

_VAR_RE = re.compile(
    r"\$(?:\{([^}]*)\}|((?:::)?[A-Za-z0-9_]+(?:::[A-Za-z0-9_]+)*)(\(([^)]*)\))?)"
)


class DfgNode(NamedTuple):
    name: str
    idx: int
    relation: str
    source_names: tuple = ()
    source_indices: tuple = ()


@dataclass(frozen=True)
class DataFlowGraph:
    nodes: tuple
    diagnostics: int = 0

    def __len__(self):
        return len(self.nodes)

    def edges(self) -> list[tuple]:
        """Index-free view used for matching."""
        return [(n.name, n.relation, tuple(sorted(n.source_names))) for n in self.nodes]


def _unescaped(text, i):
    k, j = 0, i - 1
    while j >= 0 and text[j] == "\\":
        k += 1
        j -= 1
    return k % 2 == 0


def _var_name(m):
    if m.group(1) is not None:
        return m.group(1)
    base, index = m.group(2), m.group(4)
    if index is None:
        return base
    # a literal element is its own variable; a computed one reads the array
    if "$" in index or "[" in index:
        return base
    return f"{base}({index})"


def var_refs(word: str) -> list[str]:
    """Variables read by a word, first-seen order, no repeats."""
    if word.startswith("{"):
        return []
    out: list[str] = []
    for m in _VAR_RE.finditer(word):
        if not _unescaped(word, m.start()):
            continue
        name = _var_name(m)
        if name not in out:
            out.append(name)
    return out


def substitutions(word: str) -> list[str]:
    """Top-level ``[...]`` scripts inside a non-braced word."""
    if word.startswith("{"):
        return []
    out = []
    i, n = 0, len(word)
    while i < n:
        c = word[i]
        if c == "\\":
            i += 2
            continue
        if c == "[":
            depth, j = 0, i
            while j < n:
                cj = word[j]
                if cj == "\\":
                    j += 2
                    continue
                if cj == "[":
                    depth += 1
                elif cj == "]":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            out.append(word[i + 1:j])
            i = j + 1
            continue
        i += 1
    return out


def _assigned_name(word: str) -> str:
    """Variable name written by an assignment target word."""
    if word.startswith("{") and word.endswith("}"):
        return word[1:-1]
    return word


class _Builder:
    def __init__(self, db):
        self.db = db
        self.nodes: list[DfgNode] = []
        self.defs: dict[str, int] = {}
        self.diagnostics = 0

    def add(self, name, relation, sources=()):
        idx = len(self.nodes)
        names = tuple(sources)
        indices = tuple(self.defs[s] for s in names if s in self.defs)
        self.nodes.append(DfgNode(name, idx, relation, names, indices))
        if relation == COMPUTED:
            self.defs[name] = idx

    def script(self, text):
        self.stream(tokenize(text, strict=False))

    def stream(self, stream: TclTokenStream):
        for cmd in stream.commands():
            self.command([t.text for t in cmd], [t.kind for t in cmd])

    def body(self, word):
        if word.startswith("{") and word.endswith("}"):
            self.script(word[1:-1])
        else:
            self.diagnostics += 1

    def subst(self, words):
        for w in words:
            for inner in substitutions(w):
                self.script(inner)

    def refs(self, words):
        out = []
        for w in words:
            for r in var_refs(w):
                if r not in out:
                    out.append(r)
        return out

    def command(self, words, kinds):
        name = words[0]
        args = words[1:]
        if kinds[0] == BRACE:
            self.diagnostics += 1
            return
        if name == "set":
            self.subst(args)
            if len(args) == 2:
                self.add(_assigned_name(args[0]), COMPUTED, self.refs(args[1:]))
            elif len(args) != 1:
                self.diagnostics += 1
            return
        if name == "incr":
            self.subst(args)
            if 1 <= len(args) <= 2:
                var = _assigned_name(args[0])
                self.add(var, COMPUTED, [var] + [r for r in self.refs(args[1:]) if r != var])
            else:
                self.diagnostics += 1
            return
        if name in ("append", "lappend"):
            self.subst(args)
            if args:
                var = _assigned_name(args[0])
                self.add(var, COMPUTED, [var] + [r for r in self.refs(args[1:]) if r != var])
            else:
                self.diagnostics += 1
            return
        if name == "proc":
            if len(args) == 3:
                self.body(args[2])
            else:
                self.diagnostics += 1
            return
        if name == "if":
            self._if(args)
            return
        if name == "while":
            if len(args) == 2:
                self.subst(args[:1])
                self.body(args[1])
            else:
                self.diagnostics += 1
            return
        if name == "for":
            if len(args) == 4:
                self.body(args[0])
                self.body(args[3])
                self.body(args[2])
            else:
                self.diagnostics += 1
            return
        if name == "foreach":
            self._foreach(args)
            return
        if name == "catch":
            if args:
                self.body(args[0])
            else:
                self.diagnostics += 1
            return
        self.subst(args)
        if name in self.db:
            self.add(name, COMES)

    def _if(self, args):
        i = 0
        # if cond ?then? body ?elseif cond ?then? body ...? ?else? ?body?
        while True:
            if i + 1 >= len(args):
                self.diagnostics += 1
                return
            self.subst([args[i]])
            i += 1
            if args[i] == "then":
                i += 1
                if i >= len(args):
                    self.diagnostics += 1
                    return
            self.body(args[i])
            i += 1
            if i >= len(args):
                return
            if args[i] == "elseif":
                i += 1
                continue
            if args[i] == "else":
                i += 1
                if i >= len(args):
                    self.diagnostics += 1
                    return
            self.body(args[i])
            if i + 1 != len(args):
                self.diagnostics += 1
            return

    def _foreach(self, args):
        if len(args) < 3 or len(args) % 2 == 0:
            self.diagnostics += 1
            return
        pairs = args[:-1]
        self.subst(pairs[1::2])
        for varlist, values in zip(pairs[0::2], pairs[1::2]):
            names = varlist[1:-1].split() if varlist.startswith("{") else [varlist]
            sources = var_refs(values)
            for v in names:
                self.add(v, COMPUTED, sources)
        self.body(args[-1])


def extract_dfg(stream: TclTokenStream | str, db: EdaCommandDb | None = None) -> DataFlowGraph:
    if isinstance(stream, str):
        stream = tokenize(stream, strict=False)
    b = _Builder(db or default_db())
    b.stream(stream)
    return DataFlowGraph(tuple(b.nodes), b.diagnostics)
