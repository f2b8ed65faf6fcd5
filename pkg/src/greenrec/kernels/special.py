"""Bessel functions J0, Y0, J1, Y1, K0, K1 for real positive arguments.

Arithmetic runs in ``decimal`` at 60 significant digits so the ascending
series survives its internal cancellation; results are rounded to binary64
at the end. Below ``CROSSOVER`` the ascending series is summed, above it the
Hankel asymptotic expansion with exactly precomputed coefficients.
"""

from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np

from ..errors import DomainError

CROSSOVER = 20.0
_PREC = 60
_PI = Decimal("3.14159265358979323846264338327950288419716939937510582097494459230781640628620899863")
_EULER = Decimal("0.57721566490153286060651209008240243104215933593992359880576723488486772677766467094")
_TINY = Decimal("1e-58")


@lru_cache(maxsize=None)
def asymptotic_coefficient(nu, k):
    """a_k(nu) = prod_{j=1..k} (4 nu^2 - (2j-1)^2) / (k! 8^k), exact."""
    num = 1
    for j in range(1, k + 1):
        num *= 4 * nu * nu - (2 * j - 1) ** 2
    return Fraction(num, factorial(k) * 8 ** k)


@lru_cache(maxsize=None)
def _coef_dec(nu, k):
    q = asymptotic_coefficient(nu, k)
    with localcontext() as ctx:
        ctx.prec = _PREC + 10
        return Decimal(q.numerator) / Decimal(q.denominator)


def _cos_sin(x):
    """cos and sin of a Decimal angle via range reduction and Taylor series."""
    two_pi = 2 * _PI
    x = x - two_pi * (x / two_pi).to_integral_value()
    x2 = x * x
    c, s = Decimal(0), Decimal(0)
    term_c, term_s = Decimal(1), x
    j = 0
    while abs(term_c) > _TINY or abs(term_s) > _TINY:
        c += term_c
        s += term_s
        term_c = -term_c * x2 / ((2 * j + 1) * (2 * j + 2))
        term_s = -term_s * x2 / ((2 * j + 2) * (2 * j + 3))
        j += 1
    return c, s


def _check(z):
    z = float(z)
    if not z > 0.0 or z != z:
        raise DomainError(f"Bessel argument must be positive, got {z}")
    return z


def _series_jy(z):
    zd = Decimal(z)
    q = zd * zd / 4
    # J0, J1 and the harmonic-number sums of the ascending series for Y0, Y1
    j0 = j1 = s0 = s1 = Decimal(0)
    t0 = Decimal(1)  # (-q)^k / (k!)^2
    t1 = zd / 2  # (-q)^k (z/2) / (k! (k+1)!)
    h = Decimal(0)  # H_k
    k = 0
    while True:
        j0 += t0
        j1 += t1
        if k:
            s0 += -h * t0
        # psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
        s1 += (2 * h + Decimal(1) / (k + 1)) * t1
        if abs(t0) < _TINY and abs(t1) < _TINY and k > 2:
            break
        k += 1
        h += Decimal(1) / k
        t0 = -t0 * q / (k * k)
        t1 = -t1 * q / (k * (k + 1))
    lg = (zd / 2).ln() + _EULER
    y0 = 2 / _PI * (lg * j0 + s0)
    y1 = -2 / (_PI * zd) + 2 / _PI * (zd / 2).ln() * j1 - (s1 - 2 * _EULER * j1) / _PI
    return j0, y0, j1, y1


def _asymptotic_pq(nu, zd):
    p = q = Decimal(0)
    last = None
    k = 0
    while True:
        a = _coef_dec(nu, k) / zd ** k
        mag = abs(a)
        if mag < _TINY or (last is not None and mag > last):
            break
        sign = -1 if (k // 2) % 2 else 1
        if k % 2 == 0:
            p += sign * a
        else:
            q += sign * a
        last = mag
        k += 1
    return p, q


def _asymptotic_jy(z):
    zd = Decimal(z)
    out = []
    for nu in (0, 1):
        p, q = _asymptotic_pq(nu, zd)
        chi = zd - (Decimal(2 * nu + 1) / 4) * _PI
        c, s = _cos_sin(chi)
        amp = (2 / (_PI * zd)).sqrt()
        out.append((amp * (p * c - q * s), amp * (p * s + q * c)))
    (j0, y0), (j1, y1) = out
    return j0, y0, j1, y1


def bessel_j0y0j1y1(z):
    """(J0(z), Y0(z), J1(z), Y1(z)) as floats for real z > 0."""
    z = _check(z)
    with localcontext() as ctx:
        ctx.prec = _PREC
        vals = _series_jy(z) if z <= CROSSOVER else _asymptotic_jy(z)
        return tuple(float(v) for v in vals)


def _series_ik(z):
    zd = Decimal(z)
    q = zd * zd / 4
    i0 = i1 = s0 = s1 = Decimal(0)
    t0, t1 = Decimal(1), zd / 2
    h = Decimal(0)
    k = 0
    while True:
        i0 += t0
        i1 += t1
        s0 += h * t0
        s1 += (2 * h + Decimal(1) / (k + 1)) * t1
        if t0 < _TINY * i0 and t1 < _TINY * i1:
            break
        k += 1
        h += Decimal(1) / k
        t0 = t0 * q / (k * k)
        t1 = t1 * q / (k * (k + 1))
    lg = (zd / 2).ln()
    k0 = -(lg + _EULER) * i0 + s0
    k1 = 1 / zd + lg * i1 - (s1 - 2 * _EULER * i1) / 2
    return i0, i1, k0, k1


def _asymptotic_k(z):
    zd = Decimal(z)
    pref = (_PI / (2 * zd)).sqrt() * (-zd).exp()
    out = []
    for nu in (0, 1):
        acc, last, k = Decimal(0), None, 0
        while True:
            a = _coef_dec(nu, k) / zd ** k
            if abs(a) < _TINY or (last is not None and abs(a) > last):
                break
            acc += a
            last = abs(a)
            k += 1
        out.append(pref * acc)
    return tuple(out)


def bessel_k0k1(z):
    """(K0(z), K1(z)) as floats for real z > 0."""
    z = _check(z)
    with localcontext() as ctx:
        ctx.prec = _PREC
        if z <= CROSSOVER:
            _, _, k0, k1 = _series_ik(z)
        else:
            k0, k1 = _asymptotic_k(z)
        return float(k0), float(k1)


def hankel1_01(z):
    """(H0^(1)(z), H1^(1)(z)) as complex floats."""
    j0, y0, j1, y1 = bessel_j0y0j1y1(z)
    return complex(j0, y0), complex(j1, y1)


def hankel1_01_array(z):
    z = np.asarray(z, dtype=float)
    h0 = np.empty(z.shape, dtype=complex)
    h1 = np.empty(z.shape, dtype=complex)
    for idx, v in np.ndenumerate(z):
        h0[idx], h1[idx] = hankel1_01(v)
    return h0, h1


def bessel_k01_array(z):
    z = np.asarray(z, dtype=float)
    k0 = np.empty(z.shape)
    k1 = np.empty(z.shape)
    for idx, v in np.ndenumerate(z):
        k0[idx], k1[idx] = bessel_k0k1(v)
    return k0, k1
