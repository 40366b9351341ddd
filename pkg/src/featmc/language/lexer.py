"""Regex tokenizer for model (.pfm) and property (.props) files."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from ..errors import ParseError, Position

KEYWORDS = frozenset(
    {
        "const", "int", "double", "bool", "formula", "label",
        "module", "endmodule", "controller", "endcontroller",
        "root", "feature", "endfeature", "all", "one", "of", "modules",
        "rewards", "endrewards", "constraint", "initial", "init",
        "true", "false", "active", "activate", "deactivate", "requires", "filter",
    }
)

# longest symbols first so that "<=" wins over "<"
_SYMBOLS = [
    "${", "->", "=>", "<=", ">=", "!=", "..", "=?",
    "'", "=", "<", ">", "+", "-", "*", "/", "(", ")", "[", "]", "{", "}",
    ":", ";", ",", "?", "!", "&", "|",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<newline>\n)
  | (?P<comment>//[^\n]*)
  | (?P<number>\d+\.(?!\.)\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<string>"[^"\n]*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<symbol>"""
    + "|".join(re.escape(s) for s in _SYMBOLS)
    + r""")
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "number", "string", "ident", "keyword", "symbol", "eof"
    text: str
    pos: Position

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return f"'{self.text}'"


def tokenize(text: str) -> Iterator[Token]:
    line, line_start = 1, 0
    i = 0
    n = len(text)
    while i < n:
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", Position(line, i - line_start + 1))
        kind = m.lastgroup
        tok_text = m.group()
        pos = Position(line, i - line_start + 1)
        i = m.end()
        if kind == "newline":
            line += 1
            line_start = i
            continue
        if kind in ("ws", "comment"):
            continue
        if kind == "ident" and tok_text in KEYWORDS:
            kind = "keyword"
        yield Token(kind, tok_text, pos)
    yield Token("eof", "", Position(line, n - line_start + 1))


class TokenStream:
    """Two-token lookahead cursor with expected-set bookkeeping for diagnostics."""

    def __init__(self, text: str):
        self.tokens = list(tokenize(text))
        self.index = 0
        self._expected: set[str] = set()

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def peek(self, offset: int = 1) -> Token:
        j = min(self.index + offset, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self) -> Token:
        tok = self.tokens[self.index]
        if tok.kind != "eof":
            self.index += 1
        self._expected.clear()
        return tok

    def at(self, text: str) -> bool:
        tok = self.current
        hit = tok.text == text and tok.kind in ("keyword", "symbol", "ident")
        if not hit:
            self._expected.add(f"'{text}'")
        return hit

    def at_kind(self, kind: str) -> bool:
        hit = self.current.kind == kind
        if not hit:
            self._expected.add(kind)
        return hit

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        if self.at(text):
            return self.advance()
        raise self.error()

    def expect_kind(self, kind: str) -> Token:
        if self.at_kind(kind):
            return self.advance()
        raise self.error()

    def expect_ident(self) -> Token:
        return self.expect_kind("ident")

    def error(self, message: str | None = None) -> ParseError:
        tok = self.current
        expected = frozenset(self._expected)
        self._expected.clear()
        return ParseError(message or f"unexpected {tok.describe()}", tok.pos, expected)
