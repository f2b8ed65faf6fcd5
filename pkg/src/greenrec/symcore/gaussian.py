"""Exact Gaussian rationals: a + b*i with a, b in Q."""

from fractions import Fraction
from math import gcd
import numbers


def _frac(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, int):
        return Fraction(value)
    raise TypeError(f"cannot convert {value!r} to an exact rational")


class QQi:
    """Immutable Gaussian rational. Floats are rejected to keep arithmetic exact."""

    __slots__ = ("re", "im", "_hash")

    def __init__(self, re=0, im=0):
        if isinstance(re, QQi):
            if im:
                raise TypeError("QQi(QQi, im) is ambiguous")
            self.re, self.im = re.re, re.im
        else:
            self.re = _frac(re)
            self.im = _frac(im)
        self._hash = None

    @classmethod
    def coerce(cls, value):
        if isinstance(value, QQi):
            return value
        if isinstance(value, complex):
            raise TypeError("complex floats are not exact; pass QQi(re, im)")
        return cls(value)

    def is_zero(self):
        return self.re == 0 and self.im == 0

    def is_real(self):
        return self.im == 0

    def __bool__(self):
        return not self.is_zero()

    def __eq__(self, other):
        if isinstance(other, QQi):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.re) if self.im == 0 else hash((self.re, self.im))
        return self._hash

    def __repr__(self):
        return f"QQi({self.re}, {self.im})"

    def __neg__(self):
        return QQi(-self.re, -self.im)

    def __add__(self, other):
        if not isinstance(other, QQi):
            if isinstance(other, (int, Fraction)):
                return QQi(self.re + other, self.im)
            return NotImplemented
        return QQi(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, QQi):
            if isinstance(other, (int, Fraction)):
                return QQi(self.re - other, self.im)
            return NotImplemented
        return QQi(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, QQi):
            if isinstance(other, (int, Fraction)):
                return QQi(self.re * other, self.im * other)
            return NotImplemented
        a, b, c, d = self.re, self.im, other.re, other.im
        if b == 0 and d == 0:
            return QQi(a * c)
        return QQi(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def conjugate(self):
        return QQi(self.re, -self.im)

    def norm(self):
        return self.re * self.re + self.im * self.im

    def __truediv__(self, other):
        other = QQi.coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("division by zero Gaussian rational")
        if other.im == 0:
            return QQi(self.re / other.re, self.im / other.re)
        n = other.norm()
        num = self * other.conjugate()
        return QQi(num.re / n, num.im / n)

    def __rtruediv__(self, other):
        return QQi.coerce(other) / self

    def __pow__(self, e):
        if not isinstance(e, int):
            return NotImplemented
        if e < 0:
            return QQi(1) / (self ** (-e))
        result, base = QQi(1), self
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def denominator_lcm(self):
        a, b = self.re.denominator, self.im.denominator
        return a * b // gcd(a, b)

    def to_complex(self):
        return complex(float(self.re), float(self.im))

    def to_mpc(self):
        import mpmath

        re = mpmath.mpf(self.re.numerator) / self.re.denominator
        if self.im == 0:
            return mpmath.mpc(re, 0)
        return mpmath.mpc(re, mpmath.mpf(self.im.numerator) / self.im.denominator)


numbers.Number.register(QQi)

ZERO = QQi(0)
ONE = QQi(1)
I = QQi(0, 1)
