"""Recursive-descent parser for the expression DSL.

Grammar (standard precedence, ^ binds tightest then unary minus then * /
then + -; ^ is right-associative and its exponent must be an integer or
simple rational literal):

    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := '-' unary | power
    power      := atom ('^' exponent)?
    exponent   := ['-'] (INT | DECIMAL | '(' INT '/' INT ')')  ['^' exponent]
    atom       := NUMBER | IDENT | IDENT '(' expression ')' | '(' expression ')'

Identifiers are [A-Za-z_][A-Za-z0-9_]*; numbers are decimal literals with an
optional exponent part.  Function names are exactly the node vocabulary
(exp, log, sqrt, sin, cos, tan, sinh, cosh, tanh), lowercase.  A unary minus
applied directly to a numeric literal folds into the constant, so rendered
negative constants round-trip structurally.
"""

from __future__ import annotations

import re
from fractions import Fraction

from . import expr as ex
from .errors import NonIntegerExponentError, ParseError, UnknownNameError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Token:
    __slots__ = ("kind", "text", "start", "end")

    def __init__(self, kind, text, start, end):
        self.kind = kind
        self.text = text
        self.start = start
        self.end = end


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            stripped = src[pos:].lstrip()
            at = len(src) - len(stripped)
            if not stripped:
                break
            raise ParseError(f"unexpected character {src[at]!r}", (at, at + 1))
        pos = m.end()
        for kind in ("number", "ident", "op"):
            text = m.group(kind)
            if text is not None:
                tokens.append(_Token(kind, text, m.start(kind), m.end(kind)))
                break
    tokens.append(_Token("eof", "", len(src), len(src)))
    return tokens


class _Parser:
    def __init__(self, src, coords, params):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0
        self.coords = frozenset(coords)
        self.params = frozenset(params)

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text):
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        raise ParseError(f"expected '{text}'", (tok.start, tok.end))

    def parse(self):
        e = self.expression()
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"unexpected trailing input {tok.text!r}", (tok.start, tok.end))
        return e

    def expression(self):
        e = self.term()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in "+-":
                self.advance()
                rhs = self.term()
                e = ex.add(e, rhs) if tok.text == "+" else ex.sub(e, rhs)
            else:
                return e

    def term(self):
        e = self.unary()
        while True:
            tok = self.peek()
            if tok.kind == "op" and tok.text in "*/":
                self.advance()
                rhs = self.unary()
                e = ex.mul(e, rhs) if tok.text == "*" else ex.div(e, rhs)
            else:
                return e

    def unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            inner = self.unary()
            if inner.op == "const":
                return ex.const(-inner.value)
            return ex.neg(inner)
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return ex.powi(base, self.exponent())
        return base

    def exponent(self):
        sign = 1
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            sign = -1
            tok = self.peek()
        if tok.kind == "number":
            self.advance()
            k = self._literal_rational(tok)
        elif tok.kind == "op" and tok.text == "(":
            self.advance()
            num = self.peek()
            if num.kind != "number" or "." in num.text or "e" in num.text.lower():
                raise NonIntegerExponentError(
                    "exponent must be an integer or simple rational literal",
                    (num.start, num.end))
            self.advance()
            self.expect_op("/")
            den = self.peek()
            if den.kind != "number" or "." in den.text or "e" in den.text.lower():
                raise NonIntegerExponentError(
                    "exponent must be an integer or simple rational literal",
                    (den.start, den.end))
            self.advance()
            self.expect_op(")")
            k = Fraction(int(num.text), int(den.text))
        else:
            raise NonIntegerExponentError(
                "exponent must be an integer or simple rational literal",
                (tok.start, tok.end))
        k = sign * k
        # right-associative chains of literal exponents fold numerically
        nxt = self.peek()
        if nxt.kind == "op" and nxt.text == "^":
            self.advance()
            k2 = self.exponent()
            if isinstance(k2, Fraction):
                raise NonIntegerExponentError(
                    "chained exponent must be an integer", (nxt.start, nxt.end))
            k = Fraction(k) ** k2
        if isinstance(k, Fraction) and k.denominator == 1:
            k = int(k)
        return k

    @staticmethod
    def _literal_rational(tok):
        text = tok.text
        if "." not in text and "e" not in text.lower():
            return int(text)
        k = Fraction(text)
        return int(k) if k.denominator == 1 else k

    def atom(self):
        tok = self.advance()
        if tok.kind == "number":
            return ex.const(float(tok.text))
        if tok.kind == "ident":
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if tok.text not in ex.FUNCTION_NAMES:
                    raise UnknownNameError(tok.text, (tok.start, tok.end))
                self.advance()
                arg = self.expression()
                self.expect_op(")")
                return ex.func(tok.text, arg)
            if tok.text in self.coords:
                return ex.coord(tok.text)
            if tok.text in self.params:
                return ex.param(tok.text)
            raise UnknownNameError(tok.text, (tok.start, tok.end))
        if tok.kind == "op" and tok.text == "(":
            e = self.expression()
            self.expect_op(")")
            return e
        raise ParseError("expected a value", (tok.start, tok.end))


def parse_expression(src: str, coords, params=()) -> ex.Expr:
    """Parse `src` against the declared coordinate and parameter names.

    Raises ParseError (with span) on malformed input, UnknownNameError on
    undeclared identifiers, NonIntegerExponentError for disallowed ^ forms.
    """
    if not src or not src.strip():
        raise ParseError("empty expression", (0, len(src)))
    return _Parser(src, coords, params).parse()
