"""Closed-form differentiation rules consumed by the derivation pipeline."""

from collections import namedtuple
from fractions import Fraction
from math import comb, factorial, prod


from .multiindex import MultiIndex, enumerate_vector_partitions
from .poly import Poly, standard_vars

# coeff * z**power
ZTerm = namedtuple("ZTerm", "coeff power")
# coeff * z**(num / 2**den_log2); den_log2 is 0 or 1 after reduction
SqrtZTerm = namedtuple("SqrtZTerm", "coeff num den_log2")


def rising(a, m):
    return prod(a + j for j in range(m))


def falling(a, m):
    return prod(a - j for j in range(m))


def _radial_inner_term(beta, xvars):
    """d^beta g / beta! for g = sum x_i^2, as a Poly (zero unless |beta| <= 2)."""
    order = beta.order
    if order == 1:
        i = next(j for j, e in enumerate(beta) if e)
        return Poly.var(xvars[i], xvars) * 2
    if order == 2 and max(beta) == 2:
        return Poly.const(1, xvars)
    return Poly.zero(xvars)


def faa_di_bruno_radial(alpha):
    """Pairs (k, b_k) with d^alpha f(|x|^2) = sum_k f^(k)(|x|^2) * b_k(x).

    Uses the vector-partition form
    d^alpha f(g) = sum_k f^(k)(g) * alpha! * sum_{pi in P(alpha, k)} prod_beta (d^beta g / beta!)^m_beta / m_beta!
    """
    alpha = alpha if isinstance(alpha, MultiIndex) else MultiIndex(alpha)
    xvars = standard_vars(alpha.dim, extra=())
    if alpha.order == 0:
        return [(0, Poly.const(1, xvars))]
    out = []
    for k in range(1, alpha.order + 1):
        acc = Poly.zero(xvars)
        for part in enumerate_vector_partitions(alpha, k):
            term = Poly.const(Fraction(alpha.factorial(), part.factorial()), xvars)
            for beta, mult in part.parts:
                piece = _radial_inner_term(beta, xvars)
                if piece.is_zero():
                    term = None
                    break
                term = term * piece ** mult
            if term is not None:
                acc = acc + term
        if not acc.is_zero():
            out.append((k, acc))
    return out


def deriv_square_composition(n):
    """d^n/dz^n f(z^2) = sum_k coeff * z**power * f^(k)(z^2), returned as [(k, ZTerm)]."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return [(0, ZTerm(Fraction(1), 0))]
    out = []
    for k in range((n + 1) // 2, n + 1):
        # n! / ((n-k)! (2k-n)!) * (2z)^(2k-n)
        c = Fraction(factorial(n), factorial(n - k) * factorial(2 * k - n)) * 2 ** (2 * k - n)
        out.append((k, ZTerm(c, 2 * k - n)))
    return out


def deriv_sqrt_composition(n):
    """d^n/dz^n f(sqrt z) = sum_k coeff * z**(num/2) * f^(k)(sqrt z), returned as [(k, SqrtZTerm)]."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return [(0, SqrtZTerm(Fraction(1), 0, 0))]
    out = []
    for k in range(1, n + 1):
        # (-1)^(n-k) (k)_{2(n-k)} / ((n-k)! 2^(2n-k)) * z^(-(2n-k)/2)
        c = Fraction((-1) ** (n - k) * rising(k, 2 * (n - k)), factorial(n - k) * 2 ** (2 * n - k))
        num = -(2 * n - k)
        out.append((k, SqrtZTerm(c, num // 2, 0) if num % 2 == 0 else SqrtZTerm(c, num, 1)))
    return out


def shift_product_rule(p, variables=("x1", "n")):
    """Coefficients of d^(n-l) f in d^n (x1^p f): [(l, falling(n, l) * C(p, l) * x1^(p-l))]."""
    if p < 0:
        raise ValueError("p must be non-negative")
    nvar = Poly.var("n", variables)
    out = []
    for l in range(p + 1):
        fall = Poly.const(1, nvar.vars)
        for j in range(l):
            fall = fall * (nvar - j)
        term = fall * Poly.var("x1", variables, power=p - l) * comb(p, l)
        out.append((l, term))
    return out


def square_coefficient_table(n_max):
    """Dense table sq[m][k] of the square rule as Fractions (powers of z implied as 2k-m)."""
    return [[dict(deriv_square_composition(m)).get(k, ZTerm(0, 0)).coeff for k in range(m + 1)]
            for m in range(n_max + 1)]


def sqrt_coefficient_table(n_max):
    """Dense table sr[m][k] of the sqrt rule as Fractions (z-power implied as -(2m-k)/2)."""
    return [[dict(deriv_sqrt_composition(m)).get(k, SqrtZTerm(0, 0, 0)).coeff for k in range(m + 1)]
            for m in range(n_max + 1)]


