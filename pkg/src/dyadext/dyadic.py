"""Exact dyadic rationals ``p / 2**k``.

Every measure of a cell union on a square grid, and every value of the two
permutation metrics there, is a dyadic rational.  ``DyadicRational`` keeps the
value in canonical form (odd numerator, or zero with exponent 0) so that
equality, hashing and the ``p/2^k`` text form are all bit-exact.

Mixed arithmetic with :class:`fractions.Fraction` is supported and falls back
to ``Fraction`` whenever the other operand is not dyadic.
"""

from __future__ import annotations

import numbers
import re
from fractions import Fraction

__all__ = ["DyadicRational", "as_exact", "dyadic_exponent"]

_TEXT = re.compile(r"^\s*([+-]?\d+)\s*/\s*2\^(\d+)\s*$")


def dyadic_exponent(denominator):
    """Return ``k`` when ``denominator == 2**k``, else ``None``."""
    if denominator <= 0 or denominator & (denominator - 1):
        return None
    return denominator.bit_length() - 1


class DyadicRational:
    """The number ``numerator / 2**exponent``, always in lowest terms."""

    __slots__ = ("_num", "_exp")

    def __init__(self, numerator=0, exponent=0):
        if isinstance(numerator, DyadicRational):
            if exponent:
                raise TypeError("exponent not allowed when copying")
            self._num, self._exp = numerator._num, numerator._exp
            return
        if not isinstance(numerator, numbers.Integral) or not isinstance(
            exponent, numbers.Integral
        ):
            raise TypeError("numerator and exponent must be integers")
        num, exp = int(numerator), int(exponent)
        if exp < 0:
            num, exp = num << -exp, 0
        if num == 0:
            exp = 0
        else:
            tz = (num & -num).bit_length() - 1
            shift = min(tz, exp)
            num >>= shift
            exp -= shift
        self._num = num
        self._exp = exp

    # construction -----------------------------------------------------

    @classmethod
    def from_rational(cls, value):
        """Convert an int, Fraction or DyadicRational; reject non-dyadics."""
        if isinstance(value, DyadicRational):
            return value
        if isinstance(value, numbers.Integral):
            return cls(int(value), 0)
        if isinstance(value, numbers.Rational):
            exp = dyadic_exponent(value.denominator)
            if exp is None:
                raise ValueError(f"{value} is not a dyadic rational")
            return cls(value.numerator, exp)
        raise TypeError(f"cannot convert {type(value).__name__} exactly")

    @classmethod
    def parse(cls, text):
        """Read the ``p/2^k`` form written by :meth:`__str__`.

        Plain integers and ``p/q`` with ``q`` a power of two are accepted too.
        """
        m = _TEXT.match(text)
        if m:
            return cls(int(m.group(1)), int(m.group(2)))
        try:
            return cls.from_rational(Fraction(text.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"not a dyadic rational: {text!r}") from exc

    # accessors --------------------------------------------------------

    @property
    def numerator(self):
        return self._num

    @property
    def exponent(self):
        return self._exp

    @property
    def denominator(self):
        return 1 << self._exp

    def to_fraction(self):
        return Fraction(self._num, 1 << self._exp)

    def scaled(self, exponent):
        """Return the integer ``self * 2**exponent``; it must be exact."""
        if exponent < self._exp:
            raise ValueError(f"{self} is not a multiple of 2^-{exponent}")
        return self._num << (exponent - self._exp)

    # protocol ---------------------------------------------------------

    def __repr__(self):
        return f"DyadicRational({self._num}, {self._exp})"

    def __str__(self):
        return f"{self._num}/2^{self._exp}"

    def __float__(self):
        return self._num / (1 << self._exp)

    def __bool__(self):
        return self._num != 0

    def __hash__(self):
        return hash(Fraction(self._num, 1 << self._exp))

    def __reduce__(self):
        return (DyadicRational, (self._num, self._exp))

    # arithmetic -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, DyadicRational):
            return other
        if isinstance(other, numbers.Integral):
            return DyadicRational(int(other))
        if isinstance(other, numbers.Rational):
            exp = dyadic_exponent(other.denominator)
            if exp is not None:
                return DyadicRational(other.numerator, exp)
            return Fraction(other.numerator, other.denominator)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if isinstance(o, Fraction):
            return self.to_fraction() + o
        e = max(self._exp, o._exp)
        return DyadicRational(
            (self._num << (e - self._exp)) + (o._num << (e - o._exp)), e
        )

    __radd__ = __add__

    def __neg__(self):
        return DyadicRational(-self._num, self._exp)

    def __pos__(self):
        return self

    def __abs__(self):
        return DyadicRational(abs(self._num), self._exp)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return (-self) + o

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        if isinstance(o, Fraction):
            return self.to_fraction() * o
        return DyadicRational(self._num * o._num, self._exp + o._exp)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return as_exact(self.to_fraction() / Fraction(o))

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return as_exact(Fraction(o) / self.to_fraction())

    def __pow__(self, n):
        if not isinstance(n, numbers.Integral):
            return NotImplemented
        if n < 0:
            return as_exact(self.to_fraction() ** n)
        return DyadicRational(self._num ** n, self._exp * n)

    def halve(self, times=1):
        return DyadicRational(self._num, self._exp + times)

    # comparison -------------------------------------------------------

    def _cmp_key(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            if isinstance(other, float):
                return float(self), other
            return None
        if isinstance(o, Fraction):
            return self.to_fraction(), o
        e = max(self._exp, o._exp)
        return self._num << (e - self._exp), o._num << (e - o._exp)

    def __eq__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] == k[1]

    def __lt__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] < k[1]

    def __le__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] <= k[1]

    def __gt__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] > k[1]

    def __ge__(self, other):
        k = self._cmp_key(other)
        return NotImplemented if k is None else k[0] >= k[1]


numbers.Rational.register(DyadicRational)

ZERO = DyadicRational(0)
ONE = DyadicRational(1)


def as_exact(value):
    """Normalize a rational to ``DyadicRational`` when its denominator is a
    power of two, otherwise to ``Fraction``."""
    if isinstance(value, DyadicRational):
        return value
    if isinstance(value, numbers.Integral):
        return DyadicRational(int(value))
    exp = dyadic_exponent(value.denominator)
    if exp is not None:
        return DyadicRational(value.numerator, exp)
    return Fraction(value.numerator, value.denominator)


def format_exact(value):
    """Text form used in every file: ``p/2^k`` for dyadics, ``p/q`` else."""
    v = as_exact(value)
    if isinstance(v, DyadicRational):
        return str(v)
    return f"{v.numerator}/{v.denominator}"


def parse_exact(text):
    """Inverse of :func:`format_exact`."""
    text = text.strip()
    if "^" in text:
        return DyadicRational.parse(text)
    try:
        return as_exact(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational: {text!r}") from exc
