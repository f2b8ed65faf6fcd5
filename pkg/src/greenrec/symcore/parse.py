"""Recursive-descent parser for polynomial expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' ['-'] INT)?
    atom   := INT ('/' INT)? | 'i' | NAME | '(' expr ')'

NAME is ``x<digits>``, ``r``, ``n`` or ``k``. Negative exponents are only
accepted on monomials.
"""

from fractions import Fraction
import re

from ..errors import ParseError
from .gaussian import QQi
from .poly import Poly, var_key

_TOKEN = re.compile(r"\s*(?:(\d+)|(x[1-9][0-9]*|[rnki])|(\^|\*|\+|-|/|\(|\)))")


def _tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:pos + 1]!r}", pos)
        start = m.start(m.lastindex)
        if m.group(1):
            out.append(("int", int(m.group(1)), start))
        elif m.group(2):
            out.append(("name", m.group(2), start))
        else:
            out.append(("op", m.group(3), start))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text, allowed_vars):
        self.toks = _tokenize(text)
        self.i = 0
        self.allowed = allowed_vars

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        t = self.take()
        if t[0] != "op" or t[1] != op:
            raise ParseError(f"expected {op!r}", t[2])

    def expr(self):
        acc = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def term(self):
        acc = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            acc = acc * self.unary()
        return acc

    def unary(self):
        t = self.peek()
        if t[0] == "op" and t[1] == "-":
            self.take()
            return -self.unary()
        if t[0] == "op" and t[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            neg = False
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                neg = True
            t = self.take()
            if t[0] != "int":
                raise ParseError("exponent must be an integer", t[2])
            e = -t[1] if neg else t[1]
            if e < 0 and len(base.terms) != 1:
                raise ParseError("negative exponent on a non-monomial", t[2])
            return base ** e
        return base

    def atom(self):
        t = self.take()
        kind, val, pos = t
        if kind == "int":
            if self.peek()[0] == "op" and self.peek()[1] == "/":
                self.take()
                d = self.take()
                if d[0] != "int":
                    raise ParseError("expected denominator", d[2])
                if d[1] == 0:
                    raise ParseError("zero denominator", d[2])
                return Poly.const(Fraction(val, d[1]))
            return Poly.const(val)
        if kind == "name":
            if val == "i":
                return Poly.const(QQi(0, 1))
            if self.allowed is not None and val not in self.allowed:
                raise ParseError(f"variable {val!r} not allowed here", pos)
            return Poly.var(val)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError("unexpected token" if kind != "end" else "unexpected end of input", pos)


def parse_poly(text, variables=None, allowed_vars=None):
    """Parse ``text`` into a Poly over ``variables`` (default: the variables used).

    ``allowed_vars`` restricts which names may appear; violations raise
    ParseError with the character offset.
    """
    if not isinstance(text, str):
        raise ParseError(f"expected a string, got {type(text).__name__}", 0)
    p = _Parser(text, None if allowed_vars is None else set(allowed_vars))
    if p.peek()[0] == "end":
        raise ParseError("empty expression", 0)
    result = p.expr()
    t = p.peek()
    if t[0] != "end":
        raise ParseError("trailing input", t[2])
    if variables is not None:
        extra = set(result.used_vars()) - set(variables)
        if extra:
            raise ParseError(f"unexpected variables {sorted(extra, key=var_key)}", 0)
        result = result.with_vars(tuple(sorted(variables, key=var_key)))
    return result
