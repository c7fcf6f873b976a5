"""TCL tokenizer.

Splits a script into words the way the TCL parser does: commands end at a
newline or ``;``, braces and quotes group, ``[...]`` nests, a backslash-newline
continues the command, and ``#`` starts a comment only where a command may
start. Comments and blank lines produce no tokens.
"""
from __future__ import annotations

import bisect
import re
from dataclasses import dataclass

from ..errors import TclSyntaxError, UnterminatedBrace, UnterminatedString

COMMAND = "command-word"
VARIABLE = "variable-ref"
NUMBER = "number"
STRING = "string-literal"
BRACE = "brace-group"
OPERATOR = "operator"
WORD = "word"
SUBST = "command-subst"

_NUMBER_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z|0[xX][0-9a-fA-F]+\Z")
_OPERATORS = {"==", "!=", "<", ">", "<=", ">=", "+", "-", "*", "/", "%", "&&", "||", "!",
              "=", "&", "|", "^", "~", "<<", ">>", "?", ":", ">@", "2>", "2>@1", ">>&", ">&"}


@dataclass(frozen=True)
class Token:
    text: str
    kind: str
    line: int     # zero-based line in the original script
    offset: int   # offset in TclTokenStream.source
    command: int  # ordinal of the command this word belongs to


@dataclass(frozen=True)
class TclTokenStream:
    tokens: tuple
    source: str  # the script with comments removed

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def texts(self):
        return [t.text for t in self.tokens]

    def kinds(self):
        return [t.kind for t in self.tokens]

    def commands(self) -> list[list[Token]]:
        out: list[list[Token]] = []
        last = None
        for t in self.tokens:
            if t.command != last:
                out.append([])
                last = t.command
            out[-1].append(t)
        return out

    def words(self) -> list[str]:
        """Flat word list for n-gram matching; brace groups and command
        substitutions are opened up into their inner words."""
        out: list[str] = []
        for t in self.tokens:
            _flatten(t, out)
        return out


def _flatten(tok, out):
    text = tok.text
    if tok.kind == BRACE and text.endswith("}"):
        opener, inner, closer = "{", text[1:-1], "}"
    elif tok.kind == SUBST and text.endswith("]"):
        opener, inner, closer = "[", text[1:-1], "]"
    else:
        out.append(text)
        return
    out.append(opener)
    try:
        sub = tokenize(inner)
    except TclSyntaxError:
        out.extend(inner.split())
    else:
        for t in sub.tokens:
            _flatten(t, out)
    out.append(closer)


class _Scanner:
    def __init__(self, src, strict):
        self.s = src
        self.n = len(src)
        self.strict = strict
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", src)]

    def line(self, i):
        return bisect.bisect_right(self._line_starts, i) - 1

    def fail(self, cls, msg, start):
        if self.strict:
            raise cls(msg, self.line(start) + 1)
        return self.n

    def skip_brace(self, i):
        """i at '{'; return index after the matching '}'."""
        s, depth, j = self.s, 0, i
        while j < self.n:
            c = s[j]
            if c == "\\":
                j += 2
                continue
            if c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    return j + 1
            j += 1
        return self.fail(UnterminatedBrace, "missing close-brace", i)

    def skip_quote(self, i):
        """i at '"'; return index after the closing quote."""
        s, j = self.s, i + 1
        while j < self.n:
            c = s[j]
            if c == "\\":
                j += 2
                continue
            if c == "[":
                j = self.skip_bracket(j)
                continue
            if c == '"':
                return j + 1
            j += 1
        return self.fail(UnterminatedString, "missing close-quote", i)

    def skip_bracket(self, i):
        """i at '['; return index after the matching ']'."""
        s, depth, j = self.s, 0, i
        word_start = True
        while j < self.n:
            c = s[j]
            if c == "\\":
                j += 2
                word_start = False
                continue
            if c == "[":
                depth += 1
                word_start = True
                j += 1
                continue
            if c == "]":
                depth -= 1
                j += 1
                if depth == 0:
                    return j
                word_start = False
                continue
            if c == "{" and word_start:
                j = self.skip_brace(j)
                word_start = False
                continue
            if c == '"' and word_start:
                j = self.skip_quote(j)
                word_start = False
                continue
            word_start = c in " \t\n;"
            j += 1
        return self.fail(UnterminatedBrace, "missing close-bracket", i)

    def skip_word(self, i):
        s = self.s
        c = s[i]
        if c == "{":
            j = self.skip_brace(i)
        elif c == '"':
            j = self.skip_quote(i)
        else:
            j = i
        # bare characters (and anything glued after a group)
        while j < self.n:
            c = s[j]
            if c in " \t\r\n;":
                break
            if c == "\\":
                if j + 1 < self.n and s[j + 1] == "\n":
                    break
                j += 2
                continue
            if c == "[":
                j = self.skip_bracket(j)
                continue
            if c == "$" and j + 1 < self.n and s[j + 1] == "{":
                close = s.find("}", j)
                j = self.n if close < 0 else close + 1
                continue
            j += 1
        return min(j, self.n)


def _kind(text, first):
    c = text[0]
    if c == "{":
        return BRACE
    if c == '"':
        return STRING
    if c == "[" and text.endswith("]"):
        return SUBST
    if c == "$":
        return VARIABLE
    if first:
        return COMMAND
    if _NUMBER_RE.match(text):
        return NUMBER
    if text in _OPERATORS or (c == "-" and len(text) > 1):
        return OPERATOR
    return WORD


def tokenize(script: str, strict: bool = True) -> TclTokenStream:
    """Tokenize a TCL script.

    With ``strict`` an unterminated string or brace raises; otherwise the
    group runs to the end of the script.
    """
    sc = _Scanner(script, strict)
    s, n = script, len(script)
    tokens = []
    kept = []          # pieces of the comment-stripped source
    removed = 0        # characters dropped so far (comments)
    last = 0           # start of the pending kept piece
    i = 0
    at_start = True    # a command may start here
    command = -1
    words_in_command = 0
    while i < n:
        c = s[i]
        if c == "\n" or c == ";":
            at_start = True
            words_in_command = 0
            i += 1
            continue
        if c in " \t\r\f\v":
            i += 1
            continue
        if c == "\\" and i + 1 < n and s[i + 1] == "\n":
            i += 2
            continue
        if c == "#" and at_start:
            j = i
            while j < n and s[j] != "\n":
                j += 2 if (s[j] == "\\" and j + 1 < n) else 1
            j = min(j, n)
            kept.append(s[last:i])
            removed += j - i
            last = j
            i = j
            continue
        j = sc.skip_word(i)
        if words_in_command == 0:
            command += 1
        text = s[i:j]
        tokens.append(Token(text, _kind(text, words_in_command == 0), sc.line(i), i - removed, command))
        words_in_command += 1
        at_start = False
        i = j
    kept.append(s[last:])
    return TclTokenStream(tuple(tokens), "".join(kept))


def strip_comments(script: str) -> str:
    return tokenize(script, strict=False).source
