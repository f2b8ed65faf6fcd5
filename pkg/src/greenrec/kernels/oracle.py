"""High-precision derivative oracle, independent of the recurrence pipeline.

Radial derivatives G^(m)(r) come from symbolic differentiation of the closed
form over a small expression basis (powers of r times 1, log r, exp(a r),
H_nu(k r) or K_nu(k r)). Directional derivatives along x1 then follow from
Taylor-mode composition with the truncated series of |x + t e1|.
"""

from dataclasses import dataclass
from math import factorial

import mpmath
import numpy as np

from ..errors import CapabilityError, DomainError

_GUARD = 20


@dataclass(frozen=True)
class DerivOracleResult:
    values: tuple  # mpmath numbers, d^0 .. d^n along x1
    working_precision: int
    method: str

    def as_complex(self):
        return np.array([complex(v) for v in self.values])

    def as_real(self):
        return np.array([float(mpmath.re(v)) for v in self.values])


# ---------------------------------------------------------------------------
# radial expression: {(atom, p): coefficient}, meaning coefficient * r^p * atom(r)
# atoms: ("one",), ("log",), ("exp", a), ("H", nu), ("K", nu)


def closed_form(kernel):
    kid = kernel.id
    pi = mpmath.pi
    k = None if kernel.k is None else mpmath.mpmathify(kernel.k)
    if kid == "laplace2d":
        return {(("log",), 0): -1 / (2 * pi)}
    if kid == "laplace3d":
        return {(("one",), -1): -1 / (4 * pi)}
    if kid == "helmholtz2d":
        return {(("H", 0), 0): mpmath.mpc(0, 1) / 4}
    if kid == "helmholtz3d":
        return {(("exp", mpmath.mpc(0, 1) * k), -1): 1 / (4 * pi)}
    if kid == "yukawa2d":
        return {(("K", 0), 0): 1 / (2 * pi)}
    if kid == "yukawa3d":
        return {(("exp", -k), -1): 1 / (4 * pi)}
    if kid == "biharmonic2d":
        return {(("log",), 2): 1 / (8 * pi)}
    if kid == "biharmonic3d":
        return {(("one",), 1): -1 / (8 * pi)}
    raise CapabilityError(f"no closed form for kernel {kid!r}; the oracle needs one")


def _add(acc, key, c):
    if c == 0:
        return
    v = acc.get(key)
    acc[key] = c if v is None else v + c


def _atom_derivative(atom, k):
    """d/dr atom(r) as [(coeff, atom, extra power of r)]."""
    kind = atom[0]
    if kind == "one":
        return []
    if kind == "log":
        return [(1, ("one",), -1)]
    if kind == "exp":
        return [(atom[1], atom, 0)]
    nu = atom[1]
    if kind == "H":
        # H'_nu = (H_{nu-1} - H_{nu+1}) / 2, H_{-1} = -H_1
        lo = (-k / 2, ("H", 1), 0) if nu == 0 else (k / 2, ("H", nu - 1), 0)
        return [lo, (-k / 2, ("H", nu + 1), 0)]
    if kind == "K":
        # K'_nu = -(K_{nu-1} + K_{nu+1}) / 2, K_{-1} = K_1
        return [(-k / 2, ("K", abs(nu - 1)), 0), (-k / 2, ("K", nu + 1), 0)]
    raise ValueError(atom)


def diff_radial(expr, k):
    out = {}
    for (atom, p), c in expr.items():
        if p:
            _add(out, (atom, p - 1), c * p)
        for c2, atom2, dp in _atom_derivative(atom, k):
            _add(out, (atom2, p + dp), c * c2)
    return out


def _eval_atom(atom, r, k):
    kind = atom[0]
    if kind == "one":
        return mpmath.mpf(1)
    if kind == "log":
        return mpmath.log(r)
    if kind == "exp":
        return mpmath.exp(atom[1] * r)
    if kind == "H":
        return mpmath.hankel1(atom[1], k * r)
    return mpmath.besselk(atom[1], k * r)


def radial_derivatives_mp(kernel, r, m):
    """[G^(0)(r) .. G^(m)(r)] at the current mpmath precision."""
    k = None if kernel.k is None else mpmath.mpmathify(kernel.k)
    expr = closed_form(kernel)
    cache = {}
    out = []
    for order in range(m + 1):
        total = mpmath.mpf(0)
        for (atom, p), c in expr.items():
            if atom not in cache:
                cache[atom] = _eval_atom(atom, r, k)
            total += c * r ** p * cache[atom]
        out.append(total)
        if order < m:
            expr = diff_radial(expr, k)
    return out


# ---------------------------------------------------------------------------
# Taylor-mode composition along x1


def _series_mul(a, b, n):
    out = [mpmath.mpf(0)] * (n + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(n + 1 - i):
            out[i + j] += ai * b[j]
    return out


def _distance_increment_series(x1, r, n):
    """Coefficients of |x + t e1| - |x| in powers of t up to t^n."""
    s = [mpmath.mpf(0)] * (n + 1)
    s[0] = r
    if n >= 1:
        s[1] = x1 / r
    for i in range(2, n + 1):
        c = 1 if i == 2 else 0
        acc = c - sum(s[j] * s[i - j] for j in range(1, i))
        s[i] = acc / (2 * r)
    s[0] = mpmath.mpf(0)
    return s


def _check_point(kernel, x):
    x = [mpmath.mpf(v) if not isinstance(v, mpmath.mpf) else v for v in x]
    if len(x) != kernel.dimension:
        raise DomainError(f"point has dimension {len(x)}, kernel expects {kernel.dimension}")
    if all(v == 0 for v in x):
        raise DomainError("oracle requested at the origin")
    return x


def oracle_derivatives(kernel, x, n, digits=50):
    """d^0..d^n along x1 of G(|x|) at ``digits`` significant digits."""
    if kernel.id == "custom":
        raise CapabilityError("custom kernels have no oracle")
    if digits < 30:
        raise ValueError("oracle precision must be at least 30 digits")
    with mpmath.workdps(digits + _GUARD):
        x = _check_point(kernel, x)
        r = mpmath.sqrt(mpmath.fsum(v * v for v in x))
        g = radial_derivatives_mp(kernel, r, n)
        delta = _distance_increment_series(x[0], r, n)
        # sum_m G^(m)(r)/m! * delta^m, truncated at t^n
        total = [mpmath.mpf(0)] * (n + 1)
        power = [mpmath.mpf(1)] + [mpmath.mpf(0)] * n
        for m in range(n + 1):
            coef = g[m] / factorial(m)
            for i in range(m, n + 1):
                total[i] += coef * power[i]
            if m < n:
                power = _series_mul(power, delta, n)
        vals = tuple(+(total[i] * factorial(i)) for i in range(n + 1))
    with mpmath.workdps(digits):
        vals = tuple(+v for v in vals)
    return DerivOracleResult(vals, digits, "radial-expression-tree+taylor-composition")


def oracle_partials(kernel, x, max_order, digits=50):
    """All mixed partials d^q G(|x|) with |q| <= max_order, keyed by exponent tuple."""
    if kernel.id == "custom":
        raise CapabilityError("custom kernels have no oracle")
    d = kernel.dimension
    with mpmath.workdps(digits + _GUARD):
        x = _check_point(kernel, x)
        r2 = mpmath.fsum(v * v for v in x)
        r = mpmath.sqrt(r2)
        g = radial_derivatives_mp(kernel, r, max_order)
        monos = _monomials(d, max_order)
        # u = (2 x.h + |h|^2) / r^2 as a truncated multivariate series
        u = {}
        for i in range(d):
            e = tuple(1 if j == i else 0 for j in range(d))
            u[e] = 2 * x[i] / r2
            e2 = tuple(2 if j == i else 0 for j in range(d))
            u[e2] = 1 / r2
        # delta = r (sqrt(1+u) - 1) = r sum_{j>=1} binom(1/2, j) u^j
        delta = {}
        upow = {(0,) * d: mpmath.mpf(1)}
        for j in range(1, max_order + 1):
            upow = _mv_mul(upow, u, max_order)
            c = r * mpmath.binomial(mpmath.mpf(1) / 2, j)
            for e, v in upow.items():
                delta[e] = delta.get(e, 0) + c * v
        total = {}
        power = {(0,) * d: mpmath.mpf(1)}
        for m in range(max_order + 1):
            coef = g[m] / factorial(m)
            for e, v in power.items():
                total[e] = total.get(e, 0) + coef * v
            if m < max_order:
                power = _mv_mul(power, delta, max_order)
        out = {}
        for e in monos:
            fact = 1
            for a in e:
                fact *= factorial(a)
            out[e] = +(total.get(e, mpmath.mpf(0)) * fact)
    return out


def _monomials(d, max_order):
    out = []

    def rec(i, left, acc):
        if i == d:
            out.append(tuple(acc))
            return
        for a in range(left + 1):
            rec(i + 1, left - a, acc + [a])

    rec(0, max_order, [])
    return out


def _mv_mul(a, b, max_order):
    out = {}
    for ea, va in a.items():
        sa = sum(ea)
        for eb, vb in b.items():
            if sa + sum(eb) > max_order:
                continue
            e = tuple(p + q for p, q in zip(ea, eb))
            out[e] = out.get(e, 0) + va * vb
    return out


def pde_residual(kernel, x, digits=50):
    """|L G| / max |p_q d^q G| at x using oracle mixed partials."""
    from ..symcore import QQi

    parts = oracle_partials(kernel, x, kernel.pde.order, digits)
    with mpmath.workdps(digits):
        values = {f"x{i + 1}": mpmath.mpf(v) for i, v in enumerate(x)}
        if kernel.k is not None:
            values["k"] = mpmath.mpmathify(kernel.k)
        terms = [p.evaluate(values, coeff=QQi.to_mpc) * parts[q.exponents] for q, p in kernel.pde.coefficients]
        scale = max(abs(t) for t in terms)
        return float(abs(mpmath.fsum(terms)) / scale)


def finite_difference_derivatives(kernel, x, n, digits=50):
    """Cross-check: numerical d^n along x1 with mpmath's extrapolated differences."""
    with mpmath.workdps(digits):
        x = _check_point(kernel, x)
        rest = mpmath.fsum(v * v for v in x[1:])
        expr0 = closed_form(kernel)
        k = None if kernel.k is None else mpmath.mpmathify(kernel.k)

        def g(t):
            r = mpmath.sqrt((x[0] + t) ** 2 + rest)
            return mpmath.fsum(c * r ** p * _eval_atom(a, r, k) for (a, p), c in expr0.items())

        return [mpmath.diff(g, 0, i) for i in range(n + 1)]


# ---------------------------------------------------------------------------
# fast binary64 oracle, vectorized; used where only a few digits matter


def radial_derivatives_fast(kernel, r, m):
    """Closed-form [G^(0) .. G^(m)] in binary64 using derivative identities for Bessel functions."""
    from scipy import special

    r = np.asarray(r, dtype=float)
    kid, k = kernel.id, kernel.k
    pi = np.pi
    out = []
    if kid in ("laplace2d", "laplace3d", "biharmonic2d", "biharmonic3d", "helmholtz3d", "yukawa3d"):
        # these bases are elementary: reuse the symbolic basis with float coefficients
        expr = {key: complex(v) for key, v in closed_form(kernel).items()}
        kk = None if k is None else complex(k)
        for order in range(m + 1):
            total = np.zeros_like(r, dtype=complex)
            for (atom, p), c in expr.items():
                if atom[0] == "one":
                    a = 1.0
                elif atom[0] == "log":
                    a = np.log(r)
                else:
                    a = np.exp(complex(atom[1]) * r)
                total = total + c * r ** p * a
            out.append(total)
            expr = diff_radial(expr, kk)
        return out
    z = k * r
    for order in range(m + 1):
        acc = 0
        for j in range(order + 1):
            nu = -order + 2 * j
            if kid == "helmholtz2d":
                acc = acc + (-1) ** j * _comb(order, j) * special.hankel1(nu, z)
            else:
                acc = acc + _comb(order, j) * special.kv(abs(nu), z)
        if kid == "helmholtz2d":
            out.append(0.25j * (k / 2) ** order * acc)
        else:
            out.append((-k / 2) ** order * acc / (2 * pi))
    return out


def _comb(n, k):
    from math import comb

    return comb(n, k)


def oracle_derivatives_fast(kernel, x1, xbar, n):
    """Binary64 d^0..d^n along x1 for arrays x1, xbar (xbar = distance to the x1 axis)."""
    x1 = np.asarray(x1, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    r2 = x1 * x1 + xbar * xbar
    r = np.sqrt(r2)
    g = radial_derivatives_fast(kernel, r, n)
    s = [np.zeros_like(r) for _ in range(n + 1)]
    s[0] = r
    if n >= 1:
        s[1] = x1 / r
    for i in range(2, n + 1):
        acc = (1.0 if i == 2 else 0.0) - sum(s[j] * s[i - j] for j in range(1, i))
        s[i] = acc / (2 * r)
    delta = [np.zeros_like(r)] + s[1:]
    total = [np.zeros_like(r, dtype=complex) for _ in range(n + 1)]
    power = [np.ones_like(r)] + [np.zeros_like(r) for _ in range(n)]
    for m in range(n + 1):
        coef = g[m] / factorial(m)
        for i in range(m, n + 1):
            total[i] = total[i] + coef * power[i]
        if m < n:
            newp = [np.zeros_like(r) for _ in range(n + 1)]
            for i in range(n + 1):
                for j in range(1, n + 1 - i):
                    newp[i + j] = newp[i + j] + power[i] * delta[j]
            power = newp
    return [total[i] * factorial(i) for i in range(n + 1)]
