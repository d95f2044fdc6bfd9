"""Exact Gaussian-rational scalars.

All exact jets store coefficients as ExactComplex (a pair of arbitrary
precision rationals).  Float-mode jets store plain Python complex numbers;
the two types expose the same arithmetic surface (including .conjugate()),
so jet code is written once and works for both.
"""
from __future__ import annotations

try:
    from gmpy2 import mpq as _mpq

    def QQ(num=0, den=None):
        return _mpq(num) if den is None else _mpq(num, den)

    _QTYPES = (type(_mpq(0)), int)
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from fractions import Fraction as _mpq

    def QQ(num=0, den=None):
        return _mpq(num) if den is None else _mpq(num, den)

    _QTYPES = (_mpq, int)

Q0 = QQ(0)
Q1 = QQ(1)


def is_rational(x):
    return isinstance(x, _QTYPES)


def rational_sqrt(q):
    """Exact square root of a nonnegative rational, or None if irrational."""
    import math

    if q < 0:
        return None
    if q == 0:
        return Q0
    num, den = QQ(q).numerator, QQ(q).denominator
    rn = math.isqrt(int(num))
    rd = math.isqrt(int(den))
    if rn * rn == num and rd * rd == den:
        return QQ(rn, rd)
    return None


def rational_root(q, k):
    """Exact k-th root of a rational (sign allowed for odd k), or None."""
    if q == 0:
        return Q0
    neg = q < 0
    if neg and k % 2 == 0:
        return None
    q = -q if neg else q
    num, den = QQ(q).numerator, QQ(q).denominator

    def iroot(m):
        if m == 0:
            return 0
        lo, hi = 1, int(m)
        while lo < hi:
            mid = (lo + hi) // 2
            if mid**k < m:
                lo = mid + 1
            else:
                hi = mid
        return lo

    rn, rd = iroot(int(num)), iroot(int(den))
    if rn**k == num and rd**k == den:
        r = QQ(rn, rd)
        return -r if neg else r
    return None


class ExactComplex:
    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = QQ(re)
        self.im = QQ(im)

    # -- constructors -------------------------------------------------
    @staticmethod
    def of(x):
        if isinstance(x, ExactComplex):
            return x
        if is_rational(x):
            return ExactComplex(x)
        raise TypeError(f"cannot coerce {type(x).__name__} to ExactComplex")

    # -- predicates ---------------------------------------------------
    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def is_zero(self):
        return not self

    def is_real(self):
        return not self.im

    def __eq__(self, other):
        if isinstance(other, ExactComplex):
            return self.re == other.re and self.im == other.im
        if is_rational(other):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        o = ExactComplex.of(other)
        return ExactComplex(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = ExactComplex.of(other)
        return ExactComplex(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = ExactComplex.of(other)
        return ExactComplex(o.re - self.re, o.im - self.im)

    def __neg__(self):
        return ExactComplex(-self.re, -self.im)

    def __mul__(self, other):
        o = ExactComplex.of(other)
        return ExactComplex(
            self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re
        )

    __rmul__ = __mul__

    def inverse(self):
        n = self.re * self.re + self.im * self.im
        if not n:
            raise ZeroDivisionError("ExactComplex division by zero")
        return ExactComplex(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * ExactComplex.of(other).inverse()

    def __rtruediv__(self, other):
        return ExactComplex.of(other) * self.inverse()

    # -- structure ----------------------------------------------------
    def conjugate(self):
        return ExactComplex(self.re, -self.im)

    def norm2(self):
        return self.re * self.re + self.im * self.im

    def to_complex(self):
        return complex(float(self.re), float(self.im))

    def __complex__(self):
        return self.to_complex()

    def __repr__(self):
        return f"ExactComplex({self.re!r}, {self.im!r})"

    def __str__(self):
        return f"{fmt_q(self.re)}{'+' if self.im >= 0 else '-'}{fmt_q(abs(self.im))}i"


EC_ZERO = ExactComplex(0)
EC_ONE = ExactComplex(1)
EC_I = ExactComplex(0, 1)
EC_HALF = ExactComplex(QQ(1, 2))


def units_for(exact):
    """(one, i, half) scalars for the given coefficient mode."""
    if exact:
        return EC_ONE, EC_I, EC_HALF
    return complex(1.0), complex(0.0, 1.0), complex(0.5)


def sconj(c):
    return c.conjugate()


def s_is_zero(c):
    if isinstance(c, ExactComplex):
        return c.is_zero()
    return c == 0


def fmt_q(q):
    """Canonical text form of a rational: always `num/den`."""
    q = QQ(q)
    return f"{q.numerator}/{q.denominator}"


def parse_q(s):
    s = s.strip()
    if "/" in s:
        num, den = s.split("/")
        return QQ(int(num), int(den))
    return QQ(int(s))
