"""Tokenizer for textual QIR (``.ll``)."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .ast import NO_SPAN, SourceSpan


class Kind(str, Enum):
    KEYWORD = "keyword"
    GLOBAL = "global"      # @name
    LOCAL = "local"        # %name, also type names like %Qubit
    INT = "integer"
    FLOAT = "float"
    STRING = "string"
    PUNCT = "punct"
    LABEL = "label"        # name:
    ATTR = "attr"          # #0
    META = "meta"          # !name, !0, !
    EOF = "eof"


@dataclass(frozen=True)
class Token:
    kind: Kind
    lexeme: str
    span: SourceSpan = field(default=NO_SPAN, compare=False)

    @property
    def value(self) -> str:
        """Identifier without sigil/quotes, or the lexeme itself."""
        if self.kind in (Kind.GLOBAL, Kind.LOCAL):
            return _unquote(self.lexeme[1:])
        if self.kind is Kind.LABEL:
            return _unquote(self.lexeme[:-1])
        return self.lexeme


@dataclass
class ParseError(Exception):
    message: str
    span: SourceSpan
    expected: list[str] = field(default_factory=list)
    got: Optional[Token] = None

    def __str__(self) -> str:
        return f"{self.span}: {self.message}"


_NAME = r"[-a-zA-Z$._][-a-zA-Z$._0-9]*"
_QUOTED = r'"[^"\n]*"'
_TOKEN_RE = re.compile(
    rf"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>;[^\n]*)
  | (?P<sigil>[%@](?:{_NAME}|[0-9]+|{_QUOTED}))
  | (?P<attr>\#[0-9]+)
  | (?P<meta>!(?:{_NAME}|[0-9]+)?)
  | (?P<float>[-+]?[0-9]+\.[0-9]*(?:[eE][-+]?[0-9]+)?|0x[0-9A-Fa-f]+)
  | (?P<label>(?:{_NAME}|[0-9]+|{_QUOTED}):)
  | (?P<int>-?[0-9]+)
  | (?P<cstring>c{_QUOTED})
  | (?P<string>{_QUOTED})
  | (?P<word>[a-zA-Z_$.][a-zA-Z_$.0-9]*)
  | (?P<punct>\.\.\.|[=,()\[\]{{}}*<>:])
    """,
    re.VERBOSE,
)

_KIND_OF = {
    "sigil": None,
    "attr": Kind.ATTR,
    "meta": Kind.META,
    "float": Kind.FLOAT,
    "label": Kind.LABEL,
    "int": Kind.INT,
    "cstring": Kind.STRING,
    "string": Kind.STRING,
    "word": Kind.KEYWORD,
    "punct": Kind.PUNCT,
}


def _unquote(text: str) -> str:
    if not (len(text) >= 2 and text[0] == '"' and text[-1] == '"'):
        return text
    body = text[1:-1]
    return re.sub(
        r"\\([0-9A-Fa-f]{2})", lambda m: chr(int(m.group(1), 16)), body
    )


def _scan(source: str, filename: str, errors: Optional[list[ParseError]]) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            ch = source[pos]
            if ch == '"' or (ch == "c" and source.startswith('c"', pos)):
                msg = "unterminated string"
            else:
                msg = f"illegal character {ch!r}"
            err = ParseError(msg, SourceSpan(filename, line, col, col + 1))
            if errors is None:
                raise err
            errors.append(err)
            pos += 1
            if ch == "\n":
                line, line_start = line + 1, pos
            continue
        group = m.lastgroup
        text = m.group()
        end = m.end()
        if group not in ("ws", "comment"):
            kind = _KIND_OF[group]
            if kind is None:
                kind = Kind.LOCAL if text[0] == "%" else Kind.GLOBAL
            tokens.append(Token(kind, text, SourceSpan(filename, line, col, col + len(text))))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = end
    return tokens


def lex(source: str, filename: str = "<input>") -> list[Token]:
    """Tokenize ``source``; raises :class:`ParseError` on the first bad character."""
    return _scan(source, filename, None)


def lex_recovering(source: str, filename: str = "<input>") -> tuple[list[Token], list[ParseError]]:
    errors: list[ParseError] = []
    return _scan(source, filename, errors), errors
