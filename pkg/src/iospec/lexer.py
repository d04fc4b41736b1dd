"""Tokenizer and literal parsing shared by the program, net and env formats."""

from __future__ import annotations

import re
from dataclasses import dataclass

from iospec.syntax import (
    FALSE, NIL, TRUE, UNIT, Char, Expr, Inl, Inr, Int, Pair, cons, make_string,
)


class IOLSyntaxError(Exception):
    """Syntax error with a source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Token:
    kind: str  # 'int' | 'char' | 'string' | 'ident' | 'sym' | 'eof'
    text: str
    line: int
    col: int
    value: object = None


_SYMBOLS = [
    "...", "..", ":=", "<-", "<=", "<>", "<!", "->", "=>", "::", "++",
    "(", ")", "{", "}", "[", "]", ",", ";", ".", "=", "<", ">", "+", "-",
    "!", "|",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(?://|\#)[^\n]*)
  | (?P<int>\d+)
  | (?P<char>'(?:\\.|[^'\\\n])')
  | (?P<string>"(?:\\.|[^"\\\n])*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>""" + "|".join(re.escape(s) for s in _SYMBOLS) + r""")
    """,
    re.VERBOSE,
)

_UNESCAPE = {"n": "\n", "t": "\t", "r": "\r", "0": "\0", "\\": "\\", "'": "'", '"': '"'}


def _unescape(body: str, line: int, col: int) -> str:
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            i += 1
            if i >= len(body) or body[i] not in _UNESCAPE:
                raise IOLSyntaxError("bad escape sequence", line, col)
            out.append(_UNESCAPE[body[i]])
        else:
            out.append(c)
        i += 1
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            raise IOLSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "int":
            tokens.append(Token("int", chunk, line, col, int(chunk)))
        elif kind == "char":
            tokens.append(Token("char", chunk, line, col, _unescape(chunk[1:-1], line, col)))
        elif kind == "string":
            tokens.append(Token("string", chunk, line, col, _unescape(chunk[1:-1], line, col)))
        elif kind == "ident":
            tokens.append(Token("ident", chunk, line, col, chunk))
        elif kind == "sym":
            tokens.append(Token("sym", chunk, line, col, chunk))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "ident") and t.text == text

    def at_kind(self, kind: str) -> bool:
        return self.tok.kind == kind

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.describe()}")
        return self.advance()

    def expect_ident(self) -> str:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found {self.describe()}")
        return self.advance().text

    def describe(self) -> str:
        t = self.tok
        return "end of input" if t.kind == "eof" else repr(t.text)

    def error(self, message: str, token: Token | None = None):
        t = token or self.tok
        raise IOLSyntaxError(message, t.line, t.col)


def parse_literal(ts: TokenStream) -> Expr:
    """A first-order value literal: (), true/false, chars, ints, strings,
    lists, pairs and inl/inr."""
    t = ts.tok
    if t.kind == "int":
        ts.advance()
        return Int(t.value)
    if t.kind == "char":
        ts.advance()
        return Char(t.value)
    if t.kind == "string":
        ts.advance()
        return make_string(t.value)
    if ts.at("-") and ts.peek().kind == "int":
        ts.advance()
        return Int(-ts.advance().value)
    if ts.accept("unit"):
        return UNIT
    if ts.accept("true"):
        return TRUE
    if ts.accept("false"):
        return FALSE
    if ts.accept("nil"):
        return NIL
    if ts.at("inl") or ts.at("inr"):
        ctor = Inl if ts.advance().text == "inl" else Inr
        ts.expect("(")
        inner = parse_literal(ts)
        ts.expect(")")
        return ctor(inner)
    if ts.accept("["):
        items = []
        if not ts.at("]"):
            items.append(parse_literal(ts))
            while ts.accept(","):
                items.append(parse_literal(ts))
        ts.expect("]")
        out = NIL
        for item in reversed(items):
            out = cons(item, out)
        return out
    if ts.accept("("):
        if ts.accept(")"):
            return UNIT
        items = [parse_literal(ts)]
        while ts.accept(","):
            items.append(parse_literal(ts))
        ts.expect(")")
        out = items[-1]
        for item in reversed(items[:-1]):
            out = Pair(item, out)
        return out
    ts.error(f"expected a value literal, found {ts.describe()}")


def parse_value(text: str) -> Expr:
    ts = TokenStream(text)
    v = parse_literal(ts)
    if not ts.at_kind("eof"):
        ts.error(f"trailing input {ts.describe()}")
    return v
