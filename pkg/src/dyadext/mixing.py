"""Fibrewise statistics of functions on a grid.

Functions are constant on cells and take rational values.  Everything is
computed exactly; a norm is kept as its square so it stays rational, and a
square root is only taken when a value is rendered for people.

The Koopman action is ``(T f)(z) = f(T^-1 z)``, so that ``T`` carries the
indicator of ``E`` to the indicator of ``T E``.  ``convention="forward"``
selects ``f o T`` instead.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np

from .config import settings
from .errors import GeometryError, PreconditionError, TooLarge
from .grid import GridGeometry, _expand
from .perms import project_to_base

__all__ = [
    "GridFunction",
    "FiberVector",
    "MixingValue",
    "DeviationSequence",
    "CauchySchwarzReport",
    "conditional_expectation",
    "relative_norm",
    "l2x_norm_sq",
    "l2z_norm_sq",
    "cauchy_schwarz_check",
    "fubini_identity",
    "mixing_deviation",
    "cesaro_sequence",
    "weak_mixing_witness",
    "witness_lower_bound",
    "strong_mixing_statistic",
    "half_square",
    "render_root",
]

CONVENTIONS = ("inverse", "forward")


def _lcm(values):
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _weights_int(g):
    ws = [Fraction(w) for w in g.weights]
    den = _lcm(w.denominator for w in ws)
    return np.array([int(w * den) for w in ws], dtype=object), den


class GridFunction:
    """A rational function constant on the cells of a grid.

    Values are held as integer numerators over one common denominator, in a
    ``(rows, columns)`` array.
    """

    __slots__ = ("geometry", "num", "den")

    def __init__(self, geometry, values):
        vals = [Fraction(v) for v in np.asarray(values, dtype=object).reshape(-1)]
        if len(vals) != geometry.ncells:
            raise GeometryError(f"expected {geometry.ncells} values, got {len(vals)}")
        den = _lcm(v.denominator for v in vals)
        num = np.array([v.numerator * (den // v.denominator) for v in vals], dtype=object)
        self.geometry = geometry
        self.num = num.reshape(geometry.rows, geometry.columns)
        self.den = den

    @classmethod
    def _raw(cls, geometry, num, den):
        f = cls.__new__(cls)
        g = math.gcd(den, *[int(x) for x in num.reshape(-1)])
        f.geometry = geometry
        f.num = num // g if g > 1 else num
        f.den = den // g if g > 1 else den
        return f

    @classmethod
    def constant(cls, geometry, c):
        c = Fraction(c)
        num = np.full((geometry.rows, geometry.columns), c.numerator, dtype=object)
        return cls._raw(geometry, num, c.denominator)

    @classmethod
    def from_levels(cls, geometry, level_values):
        """The function equal to ``level_values[i]`` on every cell of row ``i``."""
        if len(level_values) != geometry.rows:
            raise GeometryError("one value per row is required")
        return cls(geometry, [v for v in level_values for _ in range(geometry.columns)])

    @classmethod
    def indicator(cls, dset):
        num = np.where(dset.mask, 1, 0).astype(object)
        return cls._raw(dset.geometry, num, 1)

    @property
    def values(self):
        """A ``(rows, columns)`` object array of :class:`Fraction`."""
        out = np.empty(self.num.shape, dtype=object)
        for idx, v in np.ndenumerate(self.num):
            out[idx] = Fraction(int(v), self.den)
        return out

    def __call__(self, cell):
        column, row = cell
        return Fraction(int(self.num[row, column]), self.den)

    def refine(self, rank):
        g0 = self.geometry
        if rank == g0.rank:
            return self
        return GridFunction._raw(g0.at_rank(rank), _expand(self.num, g0, rank), self.den)

    def _align(self, other):
        g = self.geometry.common(other.geometry)
        return self.refine(g.rank), other.refine(g.rank)

    def __add__(self, other):
        if not isinstance(other, GridFunction):
            other = GridFunction.constant(self.geometry, other)
        a, b = self._align(other)
        den = _lcm([a.den, b.den])
        return GridFunction._raw(a.geometry, a.num * (den // a.den) + b.num * (den // b.den), den)

    __radd__ = __add__

    def __neg__(self):
        return GridFunction._raw(self.geometry, -self.num, self.den)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            a, b = self._align(other)
            return GridFunction._raw(a.geometry, a.num * b.num, a.den * b.den)
        c = Fraction(other)
        return GridFunction._raw(self.geometry, self.num * c.numerator, self.den * c.denominator)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        if not self.geometry.compatible(other.geometry):
            return False
        a, b = self._align(other)
        return a.den == b.den and bool((a.num == b.num).all())

    __hash__ = None

    def __repr__(self):
        return f"GridFunction({self.geometry.header()})"


@dataclass(frozen=True)
class FiberVector:
    """One rational per column: a function on the base."""

    geometry: GridGeometry
    values: tuple

    def __post_init__(self):
        if len(self.values) != self.geometry.columns:
            raise GeometryError("one value per column is required")
        object.__setattr__(self, "values", tuple(Fraction(v) for v in self.values))

    def __getitem__(self, x):
        return self.values[x]

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


def _cond_num(num, w):
    """Numerators of ``E(.|X)`` over ``wden * den``."""
    return (num * w[:, None]).sum(axis=0)


def conditional_expectation(f):
    """The fibrewise weighted average ``x -> sum_i w_i f(x, i)``."""
    w, wden = _weights_int(f.geometry)
    d = wden * f.den
    return FiberVector(f.geometry, [Fraction(int(v), d) for v in _cond_num(f.num, w)])


def relative_norm(f):
    """``E(f^2 | X)`` per column: the squared relative norm."""
    return conditional_expectation(f * f)


def l2x_norm_sq(v):
    """Squared ``L2`` norm on the base, each column having measure ``2**-rank``."""
    return sum((x * x for x in v.values), Fraction(0)) / len(v.values)


def l2z_norm_sq(f):
    """``||E(|f|^2|X)^(1/2)||^2_{L2(X)}``, the base average of the relative norm."""
    v = relative_norm(f).values
    return sum(v, Fraction(0)) / len(v)


def _l2z_direct(f):
    g = f.geometry
    acc = Fraction(0)
    for (row, _), v in np.ndenumerate(f.num):
        acc += Fraction(g.cell_measure(row)) * Fraction(int(v) ** 2, f.den ** 2)
    return acc


def fubini_identity(g):
    """Both sides of ``||E(|g|^2|X)^(1/2)||^2_{L2(X)} = ||g||^2_{L2(Z)}``.

    The left side goes column by column; the right side sums cell by cell.
    """
    return l2z_norm_sq(g), _l2z_direct(g)


@dataclass(frozen=True)
class CauchySchwarzReport:
    ok: bool
    # per column: ||f||^2 ||g||^2 - <f, g>^2, all relative to X
    margins: tuple
    # sup_x ||f||^2 * ||g||^2_{L2(Z)} - ||E(fg|X)||^2_{L2(X)}
    norm_margin: Fraction

    def __bool__(self):
        return self.ok


def cauchy_schwarz_check(f, g):
    """Check the relative Cauchy-Schwarz and norm inequalities exactly.

    Both are compared in squared form, so no roots are involved.
    """
    f, g = f._align(g)
    nf = relative_norm(f).values
    ng = relative_norm(g).values
    ip = conditional_expectation(f * g)
    margins = tuple(a * b - c * c for a, b, c in zip(nf, ng, ip.values))
    norm_margin = max(nf) * _l2z_direct(g) - l2x_norm_sq(ip)
    ok = all(m >= 0 for m in margins) and norm_margin >= 0
    return CauchySchwarzReport(ok, margins, norm_margin)


def _isqrt_fraction(q):
    q = Fraction(q)
    if q < 0:
        return None
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a == q.numerator and b * b == q.denominator:
        return Fraction(a, b)
    return None


def render_root(square, digits=12):
    """The square root of a non-negative rational to ``digits`` significant digits."""
    square = Fraction(square)
    root = _isqrt_fraction(square)
    if root is not None and root == 0:
        return "0"
    ctx = getcontext().copy()
    ctx.prec = digits + 10
    value = (ctx.divide(Decimal(square.numerator), Decimal(square.denominator))).sqrt(ctx)
    return f"{value:.{digits}g}"


@dataclass(frozen=True)
class MixingValue:
    """A norm held exactly as its square."""

    squared: Fraction

    @property
    def exact(self):
        """The norm itself when it is rational, else ``None``."""
        return _isqrt_fraction(self.squared)

    def __float__(self):
        return math.sqrt(self.squared)

    def __str__(self):
        return render_root(self.squared)

    def __ge__(self, other):
        other = Fraction(other)
        return other <= 0 or self.squared >= other * other

    def __gt__(self, other):
        other = Fraction(other)
        return self.squared > other * other if other >= 0 else True


class _Prepared:
    """Everything about (t, f, g) that does not depend on n."""

    def __init__(self, t, f, g, convention):
        if convention not in CONVENTIONS:
            raise PreconditionError(f"convention must be one of {CONVENTIONS}")
        project_to_base(t)
        geom = t.geometry.common(f.geometry).common(g.geometry)
        self.t = t.refine(geom.rank)
        self.f = f.refine(geom.rank)
        self.g = g.refine(geom.rank)
        self.geometry = geom
        self.step = self.t.image
        if convention == "inverse":
            inv = np.empty_like(self.step)
            inv[self.step] = np.arange(len(self.step))
            self.step = inv
        w, wden = _weights_int(geom)
        self.w = w
        self.wden = wden
        self.f_flat = self.f.num.reshape(-1)
        self.ef = _cond_num(self.f.num, w)
        self.eg = _cond_num(self.g.num, w)
        self.scale = wden * wden * self.f.den * self.g.den

    def source_map(self, n):
        """Cell index ``z -> t^-n z`` (or ``t^n z``), for n >= 0."""
        src = np.arange(len(self.step))
        base, e = self.step, n
        while e:
            if e & 1:
                src = base[src]
            base = base[base]
            e >>= 1
        return src

    def deviation(self, src):
        g = self.geometry
        cols = g.columns
        moved = self.f_flat[src].reshape(g.rows, cols)
        cross = _cond_num(moved * self.g.num, self.w) * self.wden
        base_src = src[:cols] % cols
        diff = cross - self.ef[base_src] * self.eg
        total = sum(int(d) * int(d) for d in diff)
        return Fraction(total, cols * self.scale * self.scale)


def mixing_deviation(t, f, g, n, convention="inverse"):
    """``||E(T^n f . g | X) - (T')^n E(f|X) . E(g|X)||_{L2(X)}`` as a :class:`MixingValue`."""
    if n < 0:
        raise PreconditionError("n must be non-negative")
    prep = _Prepared(t, f, g, convention)
    return MixingValue(prep.deviation(prep.source_map(n)))


@dataclass
class DeviationSequence:
    """Deviations for ``n = 0 .. N-1`` and their running Cesaro means.

    ``terms`` hold exact squares.  Cesaro means of the norms themselves are
    floats, since a sum of square roots is not rational in general.
    """

    terms: list
    cesaro: list = field(default_factory=list)

    def __post_init__(self):
        if not self.cesaro:
            acc = 0.0
            for i, (_, v) in enumerate(self.terms):
                acc += math.sqrt(v)
                self.cesaro.append(acc / (i + 1))

    def __len__(self):
        return len(self.terms)

    def values(self):
        return [MixingValue(v) for _, v in self.terms]

    def min_squared(self):
        return min(v for _, v in self.terms)

    def all_at_least(self, bound):
        """True when every term, hence every Cesaro mean, is ``>= bound`` (exact)."""
        bound = Fraction(bound)
        return all(v >= bound * bound for _, v in self.terms)


def cesaro_sequence(t, f, g, N, convention="inverse"):
    if N < 0:
        raise PreconditionError("N must be non-negative")
    prep = _Prepared(t, f, g, convention)
    src = np.arange(len(prep.step))
    terms = []
    for n in range(N):
        terms.append((n, prep.deviation(src)))
        src = prep.step[src]
    return DeviationSequence(terms)


def _check_weights(L, weights):
    if L < 2:
        raise PreconditionError("the witness needs at least two levels")
    if weights is None:
        weights = [Fraction(1, L)] * L
    weights = [Fraction(w) for w in weights]
    if len(weights) != L:
        raise PreconditionError(f"expected {L} weights")
    if any(w <= 0 for w in weights) or sum(weights) != 1:
        raise PreconditionError("weights must be positive and sum to 1")
    return weights


def _witness_levels(weights):
    return [-sum(weights[1:]) / weights[0]] + [Fraction(1)] * (len(weights) - 1)


def weak_mixing_witness(L, weights=None, rank=0):
    """The relative-mean-zero function ``(-sum_{i>0} w_i / w_0, 1, ..., 1)`` on levels."""
    weights = _check_weights(L, weights)
    g = GridGeometry.discrete(rank, weights)
    return GridFunction.from_levels(g, _witness_levels(weights))


def witness_lower_bound(L, weights=None):
    """``min_sigma |sum_j w_j f(j) f(sigma(j))|`` over all ``L!`` level permutations."""
    weights = _check_weights(L, weights)
    if L > settings.factorial_levels:
        raise TooLarge(f"{L}! permutations exceeds the bound {settings.factorial_levels}!")
    f = _witness_levels(weights)
    return min(
        abs(sum(w * f[j] * f[s] for j, (w, s) in enumerate(zip(weights, sigma))))
        for sigma in itertools.permutations(range(L))
    )


def half_square(geometry):
    """The indicator of the lower half ``[0,1] x [0,1/2]`` of the square."""
    if geometry.kind != "square" or geometry.rank < 1:
        raise PreconditionError("the half square needs a square grid of rank >= 1")
    rows = np.arange(geometry.rows) < geometry.rows // 2
    num = np.repeat(rows[:, None], geometry.columns, axis=1).astype(int).astype(object)
    return GridFunction._raw(geometry, num, 1)


def strong_mixing_statistic(t, k, convention="inverse"):
    """``mixing_deviation(t, 1_A, 1_A, k)`` for the lower half ``A``."""
    if t.geometry.kind != "square" or t.rank < 1:
        raise PreconditionError("the half square needs a square grid of rank >= 1")
    a = half_square(t.geometry)
    return mixing_deviation(t, a, a, k, convention)
