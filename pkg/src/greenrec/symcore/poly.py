"""Sparse multivariate (Laurent) polynomials with Gaussian-rational coefficients.

Variables are named strings drawn from ``x1..xd``, ``r``, ``n`` and ``k``
(any other identifier is accepted and ordered after those). Exponents may be
negative while a derivation is in progress; ``is_polynomial`` tells whether a
value has left the Laurent ring.
"""

from fractions import Fraction
from math import gcd
import re

from ..errors import DivisionError
from .gaussian import QQi, ONE

_XVAR = re.compile(r"x([1-9][0-9]*)$")


def var_key(name):
    m = _XVAR.match(name)
    if m:
        return (0, int(m.group(1)), "")
    fixed = {"r": 1, "n": 2, "k": 3}
    if name in fixed:
        return (fixed[name], 0, "")
    return (4, 0, name)


def standard_vars(d, extra=("r", "n", "k")):
    return tuple(f"x{i}" for i in range(1, d + 1)) + tuple(extra)


def _grlex_key(exps):
    return (sum(exps), exps)


class Poly:
    __slots__ = ("vars", "terms", "_hash")

    def __init__(self, variables, terms=None):
        self.vars = tuple(variables)
        if len(set(self.vars)) != len(self.vars):
            raise ValueError(f"duplicate variables in {self.vars}")
        if list(self.vars) != sorted(self.vars, key=var_key):
            raise ValueError(f"variables not in canonical order: {self.vars}")
        clean = {}
        for exps, c in (terms or {}).items():
            c = QQi.coerce(c)
            if c.is_zero():
                continue
            exps = tuple(exps)
            if len(exps) != len(self.vars):
                raise ValueError("exponent tuple length does not match variables")
            clean[exps] = c
        self.terms = clean
        self._hash = None

    # ---- constructors -------------------------------------------------
    @classmethod
    def zero(cls, variables=()):
        return cls(variables)

    @classmethod
    def const(cls, c, variables=()):
        return cls(variables, {(0,) * len(variables): c})

    @classmethod
    def var(cls, name, variables=None, power=1):
        variables = tuple(sorted(set(variables or ()) | {name}, key=var_key))
        exps = tuple(power if v == name else 0 for v in variables)
        return cls(variables, {exps: ONE})

    @classmethod
    def monomial(cls, variables, exps, c=1):
        return cls(variables, {tuple(exps): c})

    # ---- variable bookkeeping -----------------------------------------
    def with_vars(self, variables):
        variables = tuple(variables)
        if variables == self.vars:
            return self
        missing = set(self.vars) - set(variables)
        for v in missing:
            if any(e[self.vars.index(v)] for e in self.terms):
                raise ValueError(f"cannot drop variable {v} that occurs in the polynomial")
        pos = [self.vars.index(v) if v in self.vars else None for v in variables]
        terms = {tuple(0 if p is None else e[p] for p in pos): c for e, c in self.terms.items()}
        return Poly(variables, terms)

    def _unify(self, other):
        if not isinstance(other, Poly):
            other = Poly.const(QQi.coerce(other), self.vars)
        if other.vars == self.vars:
            return self, other
        union = tuple(sorted(set(self.vars) | set(other.vars), key=var_key))
        return self.with_vars(union), other.with_vars(union)

    def used_vars(self):
        used = set()
        for e in self.terms:
            used.update(v for v, x in zip(self.vars, e) if x)
        return tuple(v for v in self.vars if v in used)

    def trimmed(self):
        return self.with_vars(self.used_vars())

    # ---- predicates ---------------------------------------------------
    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return all(not any(e) for e in self.terms)

    def is_polynomial(self):
        return all(x >= 0 for e in self.terms for x in e)

    def constant_value(self):
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return next(iter(self.terms.values()), QQi(0))

    def degree(self, var=None):
        if not self.terms:
            return -1
        if var is None:
            return max(sum(e) for e in self.terms)
        if var not in self.vars:
            return 0
        i = self.vars.index(var)
        return max(e[i] for e in self.terms)

    def min_degree(self, var):
        if var not in self.vars or not self.terms:
            return 0
        i = self.vars.index(var)
        return min(e[i] for e in self.terms)

    # ---- ordering -----------------------------------------------------
    def sorted_terms(self):
        """Terms in descending graded-lexicographic order."""
        return sorted(self.terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)

    def leading_term(self):
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self.terms, key=_grlex_key)
        return e, self.terms[e]

    # ---- arithmetic ---------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Poly):
            try:
                other = Poly.const(QQi.coerce(other), self.vars)
            except TypeError:
                return NotImplemented
        a, b = self._unify(other)
        return a.terms == b.terms

    def __hash__(self):
        if self._hash is None:
            t = self.trimmed()
            self._hash = hash((t.vars, frozenset(t.terms.items())))
        return self._hash

    def __neg__(self):
        return Poly(self.vars, {e: -c for e, c in self.terms.items()})

    def __add__(self, other):
        try:
            a, b = self._unify(other)
        except TypeError:
            return NotImplemented
        out = dict(a.terms)
        for e, c in b.terms.items():
            s = out.get(e)
            out[e] = c if s is None else s + c
        return Poly(a.vars, out)

    __radd__ = __add__

    def __sub__(self, other):
        try:
            a, b = self._unify(other)
        except TypeError:
            return NotImplemented
        return a + (-b)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, QQi)):
            c0 = QQi.coerce(other)
            if c0.is_zero():
                return Poly(self.vars)
            return Poly(self.vars, {e: c * c0 for e, c in self.terms.items()})
        try:
            a, b = self._unify(other)
        except TypeError:
            return NotImplemented
        out = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                s = out.get(e)
                out[e] = c1 * c2 if s is None else s + c1 * c2
        return Poly(a.vars, out)

    __rmul__ = __mul__

    def __pow__(self, e):
        if not isinstance(e, int) or e < 0:
            if isinstance(e, int) and len(self.terms) == 1:
                (exps, c), = self.terms.items()
                return Poly(self.vars, {tuple(x * e for x in exps): c ** e})
            raise ValueError("only monomials may be raised to negative powers")
        result = Poly.const(1, self.vars)
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def scale(self, c):
        return self * QQi.coerce(c)

    def shift_monomial(self, exps):
        """Multiply by the (possibly Laurent) monomial with the given exponents."""
        return Poly(self.vars, {tuple(x + y for x, y in zip(e, exps)): c for e, c in self.terms.items()})

    def exact_divide(self, other):
        """Quotient q with self == q*other; DivisionError if the remainder is nonzero."""
        a, b = self._unify(other)
        if b.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        if not (a.is_polynomial() and b.is_polynomial()):
            raise ValueError("exact_divide is defined on polynomials only")
        lt_e, lt_c = b.leading_term()
        quotient = {}
        rem = a
        while not rem.is_zero():
            re_, rc = rem.leading_term()
            qe = tuple(x - y for x, y in zip(re_, lt_e))
            if any(x < 0 for x in qe):
                raise DivisionError("polynomial division leaves a nonzero remainder")
            qc = rc / lt_c
            quotient[qe] = qc
            rem = rem - b.shift_monomial(qe) * qc
        return Poly(a.vars, quotient)

    # ---- calculus and substitution ------------------------------------
    def diff(self, var):
        if var not in self.vars:
            return Poly(self.vars)
        i = self.vars.index(var)
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = e[:i] + (e[i] - 1,) + e[i + 1:]
                out[ne] = c * e[i]
        return Poly(self.vars, out)

    def subs(self, var, value):
        """Substitute a Poly or exact number for ``var``; the variable is dropped."""
        if var not in self.vars:
            return self
        i = self.vars.index(var)
        rest_vars = self.vars[:i] + self.vars[i + 1:]
        if not isinstance(value, Poly):
            value = Poly.const(QQi.coerce(value), rest_vars)
        powers = {}
        out = Poly(rest_vars)
        grouped = {}
        for e, c in self.terms.items():
            grouped.setdefault(e[i], {})[e[:i] + e[i + 1:]] = c
        for p, terms in grouped.items():
            if p not in powers:
                powers[p] = value ** p
            out = out + Poly(rest_vars, terms) * powers[p]
        return out

    def coefficients_in(self, var):
        """Map exponent -> coefficient Poly (without ``var``)."""
        if var not in self.vars:
            return {0: self}
        i = self.vars.index(var)
        rest_vars = self.vars[:i] + self.vars[i + 1:]
        grouped = {}
        for e, c in self.terms.items():
            grouped.setdefault(e[i], {})[e[:i] + e[i + 1:]] = c
        return {p: Poly(rest_vars, t) for p, t in sorted(grouped.items())}

    def evaluate(self, values, coeff=QQi.to_complex):
        """Numeric value; ``values`` maps every used variable to a number or array."""
        total = 0
        for e, c in self.sorted_terms():
            term = coeff(c)
            for v, x in zip(self.vars, e):
                if x:
                    term = term * values[v] ** x
            total = total + term
        return total

    # ---- content ------------------------------------------------------
    def content_normalized(self):
        """(unit*content, primitive part) with Gaussian-integer primitive coefficients.

        The primitive part has integer-gcd 1 over all real and imaginary parts
        and its leading coefficient has positive real part and non-negative
        imaginary part.
        """
        if self.is_zero():
            return QQi(1), self
        lcm = 1
        for c in self.terms.values():
            d = c.denominator_lcm()
            lcm = lcm * d // gcd(lcm, d)
        g = 0
        for c in self.terms.values():
            g = gcd(g, int(c.re * lcm))
            g = gcd(g, int(c.im * lcm))
        factor = QQi(Fraction(lcm, g))
        prim = self * factor
        _, lc = prim.leading_term()
        for unit in (QQi(1), QQi(0, -1), QQi(-1), QQi(0, 1)):
            v = lc * unit
            if v.re > 0 and v.im >= 0:
                break
        prim = prim * unit
        return QQi(1) / (factor * unit), prim

    def monomial_content(self, var_names=None):
        """Exponent tuple of the largest monomial dividing every term (restricted to ``var_names``)."""
        if self.is_zero():
            return (0,) * len(self.vars)
        names = set(var_names if var_names is not None else self.vars)
        out = []
        for i, v in enumerate(self.vars):
            out.append(min(e[i] for e in self.terms) if v in names else 0)
        return tuple(out)

    # ---- printing -----------------------------------------------------
    def __str__(self):
        from .printing import format_poly

        return format_poly(self)

    def __repr__(self):
        return f"Poly({str(self)!r}, vars={self.vars})"
