"""Exact scalars: rationals (gmpy2.mpq) and quadratic surds a + b*sqrt(s).

Every optimal radius of a centered window average over a piecewise-linear
function centred at a rational point is either rational or the square root
of a rational, so all values this package produces live in Q(sqrt(s)) for a
single radicand s.  Comparisons between numbers with different radicands are
decided by exact sign tests, never by rounding.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

import gmpy2
from gmpy2 import mpq

__all__ = [
    "mpq",
    "Surd",
    "Real",
    "Q",
    "to_float",
    "sign",
    "cmp",
    "is_zero",
    "format_rational",
    "format_exact",
    "parse_rational",
]

ZERO = mpq(0)
ONE = mpq(1)


def Q(value) -> mpq:
    """Coerce ints, Fractions, mpq, decimal or "p/q" strings to mpq.

    Floats are converted exactly (their binary expansion), which is rarely
    what a caller wants; pass strings for decimal literals.
    """
    if isinstance(value, mpq):
        return value
    if isinstance(value, (int, gmpy2.mpz)):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        return parse_rational(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot represent {value!r} as a rational")
        return mpq(value)
    if isinstance(value, Surd):
        if value.b != 0:
            raise ValueError(f"{value} is irrational")
        return value.a
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def parse_rational(text: str) -> mpq:
    text = text.strip()
    try:
        fr = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational literal: {text!r}") from exc
    return mpq(fr.numerator, fr.denominator)


def format_rational(q: mpq) -> str:
    q = Q(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _rational_sqrt(q: mpq):
    """Exact sqrt of a nonnegative rational if it is a perfect square, else None."""
    n, d = q.numerator, q.denominator
    if gmpy2.is_square(n) and gmpy2.is_square(d):
        return mpq(gmpy2.isqrt(n), gmpy2.isqrt(d))
    return None


def _sign_q(q) -> int:
    return (q > 0) - (q < 0)


def _sign1(p: mpq, b: mpq, s: mpq) -> int:
    """Sign of p + b*sqrt(s), s >= 0."""
    if b == 0 or s == 0:
        return _sign_q(p)
    sb = _sign_q(b)
    sp = _sign_q(p)
    if sp == 0 or sp == sb:
        return sb
    diff = p * p - b * b * s
    if diff > 0:
        return sp
    if diff < 0:
        return sb
    return 0


def _sign2(p: mpq, b: mpq, s: mpq, c: mpq, t: mpq) -> int:
    """Sign of p + b*sqrt(s) + c*sqrt(t) with s, t >= 0."""
    if c == 0 or t == 0:
        return _sign1(p, b, s)
    if b == 0 or s == 0:
        return _sign1(p, c, t)
    if s == t:
        return _sign1(p, b + c, s)
    sx = _sign1(p, b, s)
    sy = _sign_q(c)
    if sx == 0:
        return sy
    if sx == sy:
        return sx
    # opposite signs: compare X^2 = p^2 + b^2 s + 2pb sqrt(s) against c^2 t
    d = _sign1(p * p + b * b * s - c * c * t, 2 * p * b, s)
    if d > 0:
        return sx
    if d < 0:
        return sy
    return 0


class Surd:
    """The real number a + b*sqrt(s) with rational a, b and rational s >= 0.

    Instances are normalised so that b == 0 whenever sqrt(s) is rational;
    ``Surd.make`` returns a plain mpq in that case.
    """

    __slots__ = ("a", "b", "s")

    def __init__(self, a, b, s):
        self.a = a
        self.b = b
        self.s = s

    @staticmethod
    def make(a, b, s):
        a, b, s = Q(a), Q(b), Q(s)
        if s < 0:
            raise ValueError("negative radicand")
        if b == 0 or s == 0:
            return a
        root = _rational_sqrt(s)
        if root is not None:
            return a + b * root
        return Surd(a, b, s)

    @staticmethod
    def sqrt(q):
        """sqrt(q) for rational q >= 0, exact."""
        return Surd.make(0, 1, q)

    # arithmetic -----------------------------------------------------------
    def _same(self, other):
        if isinstance(other, Surd):
            if other.s != self.s:
                raise ValueError("arithmetic across different radicands is not supported")
            return other.a, other.b
        return Q(other), ZERO

    def __add__(self, other):
        if not isinstance(other, (Surd, mpq, int, Fraction, gmpy2.mpz)):
            return NotImplemented
        a, b = self._same(other)
        return Surd.make(self.a + a, self.b + b, self.s)

    __radd__ = __add__

    def __neg__(self):
        return Surd(-self.a, -self.b, self.s)

    def __sub__(self, other):
        if not isinstance(other, (Surd, mpq, int, Fraction, gmpy2.mpz)):
            return NotImplemented
        a, b = self._same(other)
        return Surd.make(self.a - a, self.b - b, self.s)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if not isinstance(other, (Surd, mpq, int, Fraction, gmpy2.mpz)):
            return NotImplemented
        a, b = self._same(other)
        return Surd.make(self.a * a + self.b * b * self.s, self.a * b + self.b * a, self.s)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (Surd, mpq, int, Fraction, gmpy2.mpz)):
            return NotImplemented
        a, b = self._same(other)
        norm = a * a - b * b * self.s
        if norm == 0:
            raise ZeroDivisionError("division by zero surd")
        # multiply by the conjugate a - b sqrt(s)
        num_a = self.a * a - self.b * b * self.s
        num_b = self.b * a - self.a * b
        return Surd.make(num_a / norm, num_b / norm, self.s)

    def __rtruediv__(self, other):
        return _as_surd(Q(other), self.s) / self

    # comparison -----------------------------------------------------------
    def sign(self) -> int:
        return _sign1(self.a, self.b, self.s)

    def _cmp(self, other) -> int:
        if isinstance(other, Surd):
            return _sign2(self.a - other.a, self.b, self.s, -other.b, other.s)
        return _sign1(self.a - Q(other), self.b, self.s)

    def __eq__(self, other):
        if not isinstance(other, (Surd, mpq, int, Fraction, gmpy2.mpz)):
            return NotImplemented
        return self._cmp(other) == 0

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    __hash__ = None

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __float__(self):
        return float(self.a) + float(self.b) * math.sqrt(float(self.s))

    def __repr__(self):
        return f"Surd({format_rational(self.a)}, {format_rational(self.b)}, {format_rational(self.s)})"

    def __str__(self):
        return format_exact(self)


def _as_surd(q: mpq, s: mpq) -> Surd:
    return Surd(q, ZERO, s)


Real = Union[mpq, Surd]


def to_float(v) -> float:
    return float(v)


def sign(v) -> int:
    if isinstance(v, Surd):
        return v.sign()
    return _sign_q(v)


def cmp(x, y) -> int:
    """Exact three-way comparison of two Reals (mpq or Surd)."""
    if isinstance(x, Surd):
        return x._cmp(y)
    if isinstance(y, Surd):
        return -y._cmp(x)
    return _sign_q(x - y)


def is_zero(v) -> bool:
    return sign(v) == 0


def format_exact(v) -> str:
    """"p/q" for rationals, "(p+q√s)/t" with integer s for surds."""
    if not isinstance(v, Surd):
        return format_rational(v)
    # b*sqrt(n/d) = (b/d)*sqrt(n*d)
    n, d = v.s.numerator, v.s.denominator
    radicand = n * d
    b = v.b / d
    t = gmpy2.lcm(v.a.denominator, b.denominator)
    p = v.a * t
    q = b * t
    p_s = str(p.numerator)
    q_s = f"{q.numerator:+d}"
    return f"({p_s}{q_s}√{radicand})/{t}"
