"""Permutations of dyadic intervals and of grid cells.

A :class:`CellPermutation` is a bijection of the cells of one grid that sends
every row to a row of the same weight, so it preserves the product measure.
It is *column-preserving* when all cells of a column land in one column; the
induced map on columns is then an :class:`IntervalPermutation` of the base.

Composition follows function notation: ``compose(a, b)`` applies ``b`` first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np

from .config import check_rank, settings
from .dyadic import DyadicRational, as_exact
from .errors import GeometryError, NotColumnPreserving, PreconditionError, RankError, TooLarge
from .grid import Cell, DyadicSet, GridGeometry

__all__ = [
    "IntervalPermutation",
    "CellPermutation",
    "Neighborhood",
    "Membership",
    "compose",
    "inverse",
    "power",
    "project_to_base",
    "is_column_preserving",
    "fiber_action",
    "metric_dprime",
    "metric_d_bruteforce",
    "metric_d_bounds",
    "dyadic_squares",
    "square_neighborhood",
    "neighborhood_contains",
    "perturb_off_extension",
    "random_column_preserving",
    "random_extension",
]


def _cycles_of(image):
    n = len(image)
    seen = np.zeros(n, bool)
    out = []
    for start in range(n):
        if seen[start]:
            continue
        cyc = []
        x = start
        while not seen[x]:
            seen[x] = True
            cyc.append(x)
            x = int(image[x])
        out.append(cyc)
    return out


def _lcm(values):
    return reduce(lambda a, b: a * b // math.gcd(a, b), values, 1)


def _power_array(image, n):
    n = int(n)
    if n < 0:
        inv = np.empty_like(image)
        inv[image] = np.arange(len(image))
        image, n = inv, -n
    result = np.arange(len(image))
    base = image
    while n:
        if n & 1:
            result = base[result]
        base = base[base]
        n >>= 1
    return result


class IntervalPermutation:
    """A bijection of the ``2**rank`` dyadic intervals of rank ``rank``."""

    __slots__ = ("rank", "image")

    def __init__(self, rank, image):
        image = tuple(int(x) for x in image)
        if len(image) != 1 << rank:
            raise GeometryError(f"rank {rank} needs {1 << rank} images")
        if sorted(image) != list(range(len(image))):
            raise PreconditionError("interval map is not a bijection")
        self.rank = rank
        self.image = image

    @classmethod
    def identity(cls, rank):
        return cls(rank, range(1 << rank))

    @classmethod
    def from_cycles(cls, rank, cycles):
        """Build from 0-based cycles; unlisted intervals are fixed."""
        image = list(range(1 << rank))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                image[a] = b
        return cls(rank, image)

    def __call__(self, i):
        return self.image[i]

    def __len__(self):
        return len(self.image)

    def refine(self, rank):
        if rank < self.rank:
            raise RankError("cannot refine to a coarser rank")
        d = rank - self.rank
        m = (1 << d) - 1
        return IntervalPermutation(
            rank, [(self.image[i >> d] << d) | (i & m) for i in range(1 << rank)]
        )

    def coarsest(self):
        p = self
        while p.rank > 0:
            img = p.image
            ok = all(img[2 * i] % 2 == 0 and img[2 * i + 1] == img[2 * i] + 1
                     for i in range(len(img) // 2))
            if not ok:
                break
            p = IntervalPermutation(p.rank - 1, [img[2 * i] // 2 for i in range(len(img) // 2)])
        return p

    def _common(self, other):
        r = max(self.rank, other.rank)
        return self.refine(r), other.refine(r)

    def compose(self, other):
        a, b = self._common(other)
        return IntervalPermutation(a.rank, [a.image[x] for x in b.image])

    def inverse(self):
        inv = [0] * len(self.image)
        for i, x in enumerate(self.image):
            inv[x] = i
        return IntervalPermutation(self.rank, inv)

    def power(self, n):
        return IntervalPermutation(self.rank, _power_array(np.array(self.image), n))

    def cycles(self):
        return _cycles_of(self.image)

    def cycle_lengths(self):
        return sorted(len(c) for c in self.cycles())

    def period(self):
        return _lcm(len(c) for c in self.cycles())

    def is_identity(self):
        return all(i == x for i, x in enumerate(self.image))

    def lift(self, geometry):
        """The product map ``self x identity`` on a grid (refined as needed)."""
        rank = max(self.rank, geometry.rank)
        g = geometry.at_rank(rank)
        p = self.refine(rank)
        idx = np.arange(g.ncells)
        col = idx % g.columns
        row = idx // g.columns
        return CellPermutation(g, row * g.columns + np.asarray(p.image)[col])

    def __eq__(self, other):
        if not isinstance(other, IntervalPermutation):
            return NotImplemented
        a, b = self._common(other)
        return a.image == b.image

    def __hash__(self):
        c = self.coarsest()
        return hash((c.rank, c.image))

    def __repr__(self):
        cyc = [c for c in self.cycles() if len(c) > 1]
        body = "".join("(" + " ".join(str(x + 1) for x in c) + ")" for c in cyc)
        return f"IntervalPermutation(rank={self.rank}, {body or 'id'})"


class CellPermutation:
    """A measure-preserving bijection of the cells of a grid.

    ``image[i]`` is the flat index of the image of cell ``i``.
    """

    __slots__ = ("geometry", "image")

    def __init__(self, geometry, image, check=True):
        image = np.asarray(image, dtype=np.int64).reshape(-1)
        if check:
            if len(image) != geometry.ncells:
                raise GeometryError(f"expected {geometry.ncells} images, got {len(image)}")
            hit = np.zeros(geometry.ncells, bool)
            if image.min(initial=0) < 0 or image.max(initial=0) >= geometry.ncells:
                raise PreconditionError("image index outside the grid")
            hit[image] = True
            if not hit.all():
                raise PreconditionError("cell map is not a bijection")
            if geometry.kind == "discrete" and not geometry.uniform:
                rows = np.arange(geometry.ncells) // geometry.columns
                w = np.array([Fraction(x) for x in geometry.weights], dtype=object)
                if not (w[rows] == w[image // geometry.columns]).all():
                    raise PreconditionError("map sends a level to a level of different weight")
        image = image.copy()
        image.flags.writeable = False
        self.geometry = geometry
        self.image = image

    # construction -----------------------------------------------------

    @classmethod
    def identity(cls, geometry):
        return cls(geometry, np.arange(geometry.ncells), check=False)

    @classmethod
    def from_cycles(cls, geometry, cycles):
        """Build from cycles of 1-based row-major labels; unlisted cells are fixed."""
        image = np.arange(geometry.ncells)
        seen = set()
        for cyc in cycles:
            cyc = [int(x) - 1 for x in cyc]
            for x in cyc:
                if not 0 <= x < geometry.ncells:
                    raise GeometryError(f"label {x + 1} outside the grid")
                if x in seen:
                    raise PreconditionError(f"label {x + 1} appears twice")
                seen.add(x)
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                image[a] = b
        return cls(geometry, image)

    @classmethod
    def from_mapping(cls, geometry, mapping):
        """Build from ``{(col, row): (col, row)}``; unlisted cells are fixed."""
        image = np.arange(geometry.ncells)
        for src, dst in mapping.items():
            image[geometry.cell_index(src)] = geometry.cell_index(dst)
        return cls(geometry, image)

    # basic protocol ---------------------------------------------------

    @property
    def rank(self):
        return self.geometry.rank

    def __call__(self, cell):
        i = self.geometry.cell_index(cell)
        return self.geometry.cell_at(int(self.image[i]))

    def __eq__(self, other):
        if not isinstance(other, CellPermutation):
            return NotImplemented
        if not self.geometry.compatible(other.geometry):
            return False
        a, b = _common(self, other)
        return bool(np.array_equal(a.image, b.image))

    def __hash__(self):
        return hash((self.geometry, self.image.tobytes()))

    def __repr__(self):
        moved = int((self.image != np.arange(len(self.image))).sum())
        return f"CellPermutation({self.geometry.header()}, moved={moved})"

    def is_identity(self):
        return bool((self.image == np.arange(len(self.image))).all())

    def refine(self, rank):
        """The same map on the grid of a finer rank (cells move rigidly)."""
        g0 = self.geometry
        if rank < g0.rank:
            raise RankError(f"cannot refine rank {g0.rank} to rank {rank}")
        if rank == g0.rank:
            return self
        check_rank(rank)
        g = g0.at_rank(rank)
        d = rank - g0.rank
        m = (1 << d) - 1
        idx = np.arange(g.ncells, dtype=np.int64)
        c = idx % g.columns
        r = idx // g.columns
        if g0.kind == "square":
            parent = (r >> d) * g0.columns + (c >> d)
            img = self.image[parent]
            ic, ir = img % g0.columns, img // g0.columns
            new = ((ir << d) | (r & m)) * g.columns + ((ic << d) | (c & m))
        else:
            parent = r * g0.columns + (c >> d)
            img = self.image[parent]
            ic, ir = img % g0.columns, img // g0.columns
            new = ir * g.columns + ((ic << d) | (c & m))
        return CellPermutation(g, new, check=False)

    def coarsest(self):
        """The same map at the smallest rank on which it moves cells rigidly."""
        p = self
        while p.rank > 0:
            q = _coarsen_once(p)
            if q is None:
                break
            p = q
        return p

    def cycles(self):
        """Disjoint cycles of flat indices, each starting at its smallest cell."""
        return _cycles_of(self.image)

    def cycle_lengths(self):
        return sorted(len(c) for c in self.cycles())

    def period(self):
        return _lcm(len(c) for c in self.cycles())

    def image_of(self, dset):
        """The set ``self(dset)``, at the finer of the two ranks."""
        if not self.geometry.compatible(dset.geometry):
            raise GeometryError("set and permutation live on incompatible grids")
        rank = max(self.rank, dset.rank)
        p = self.refine(rank)
        s = dset.refine(rank)
        out = np.zeros(p.geometry.ncells, bool)
        out[p.image[s.flat]] = True
        return DyadicSet(p.geometry, out)

    def moved_cells(self):
        return np.flatnonzero(self.image != np.arange(len(self.image)))


def _coarsen_once(p):
    g = p.geometry
    cols = g.columns
    half = g.at_rank(g.rank - 1)
    img = p.image
    idx = np.arange(half.ncells)
    c0 = idx % half.columns
    r0 = idx // half.columns
    if g.kind == "square":
        base_r = 2 * r0
    else:
        base_r = r0
    anchor = base_r * cols + 2 * c0
    a_img = img[anchor]
    ac, ar = a_img % cols, a_img // cols
    if (ac % 2).any():
        return None
    if g.kind == "square" and (ar % 2).any():
        return None
    offsets = [(0, 1)] + ([(1, 0), (1, 1)] if g.kind == "square" else [])
    for dr, dc in offsets:
        cell = (base_r + dr) * cols + 2 * c0 + dc
        want = (ar + dr) * cols + ac + dc
        if not np.array_equal(img[cell], want):
            return None
    if g.kind == "square":
        new = (ar // 2) * half.columns + ac // 2
    else:
        new = ar * half.columns + ac // 2
    return CellPermutation(half, new, check=False)


def _common(a, b):
    if not a.geometry.compatible(b.geometry):
        raise GeometryError(f"incompatible grids: {a.geometry} and {b.geometry}")
    r = max(a.rank, b.rank)
    return a.refine(r), b.refine(r)


def compose(a, b, *rest):
    """``a`` after ``b`` (after any further arguments, right to left)."""
    if rest:
        return compose(a, compose(b, *rest))
    a, b = _common(a, b)
    return CellPermutation(a.geometry, a.image[b.image], check=False)


def inverse(a):
    inv = np.empty_like(a.image)
    inv[a.image] = np.arange(len(a.image))
    return CellPermutation(a.geometry, inv, check=False)


def power(a, n):
    return CellPermutation(a.geometry, _power_array(a.image, n), check=False)


def _column_images(q):
    g = q.geometry
    return (q.image % g.columns).reshape(g.rows, g.columns)


def project_to_base(q):
    """The base permutation ``q'`` with ``column(q(c)) = q'(column(c))``.

    Raises :class:`NotColumnPreserving` carrying two cells of one column whose
    images lie in different columns.
    """
    g = q.geometry
    cols = _column_images(q)
    bad = np.flatnonzero((cols != cols[0]).any(axis=0))
    if len(bad):
        c = int(bad[0])
        r = int(np.flatnonzero(cols[:, c] != cols[0, c])[0])
        witness = (Cell(c, 0), Cell(c, r))
        raise NotColumnPreserving(
            f"cells {witness[0]} and {witness[1]} share a column but map to "
            f"columns {int(cols[0, c])} and {int(cols[r, c])}",
            witness,
        )
    return IntervalPermutation(g.rank, cols[0])


def is_column_preserving(q):
    cols = _column_images(q)
    return bool((cols == cols[0]).all())


def fiber_action(t, n, column):
    """The row permutation ``j -> row(t**n(column, j))`` over one column."""
    project_to_base(t)
    g = t.geometry
    if not 0 <= column < g.columns:
        raise GeometryError(f"column {column} outside the grid")
    tn = _power_array(t.image, n)
    cells = np.arange(g.rows) * g.columns + column
    return tuple(int(x) for x in tn[cells] // g.columns)


def _weighted_measure(g, flat_mask):
    rows = np.flatnonzero(flat_mask) // g.columns
    return g.measure_of_counts(np.bincount(rows, minlength=g.rows))


def metric_dprime(s, t):
    """Exact measure of the cells on which ``s`` and ``t`` disagree."""
    s, t = _common(s, t)
    return _weighted_measure(s.geometry, s.image != t.image)


def _cell_units(g):
    ms = [Fraction(g.cell_measure(r)) for r in range(g.rows)]
    den = _lcm(m.denominator for m in ms)
    per_row = [int(m * den) for m in ms]
    units = [per_row[i // g.columns] for i in range(g.ncells)]
    return units, den


def metric_d_bruteforce(s, t):
    """``sup_E m(sE ^ tE)`` over every union ``E`` of cells, by enumeration.

    Visits all ``2**cells`` subsets in Gray-code order, updating the
    symmetric difference one cell at a time.
    """
    s, t = _common(s, t)
    g = s.geometry
    n = g.ncells
    if n > settings.bruteforce_cells:
        raise TooLarge(
            f"{n} cells exceeds the brute-force bound {settings.bruteforce_cells}; "
            "use metric_d_bounds"
        )
    units, den = _cell_units(g)
    si = [int(x) for x in s.image]
    ti = [int(x) for x in t.image]
    diff = 0
    cur = 0
    best = 0
    for step in range(1, 1 << n):
        i = (step & -step).bit_length() - 1
        a, b = si[i], ti[i]
        if a == b:
            continue
        for bit in (a, b):
            if diff >> bit & 1:
                cur -= units[bit]
            else:
                cur += units[bit]
            diff ^= 1 << bit
        if cur > best:
            best = cur
    return as_exact(Fraction(best, den))


def metric_d_bounds(s, t):
    """A certified interval ``(lower, upper)`` containing ``d(s, t)``.

    ``lower`` is the deviation of one explicit set: along every cycle of
    ``s^-1 t`` take every other cell.  ``upper`` is ``d'(s, t)``.
    """
    s, t = _common(s, t)
    g = s.geometry
    pi = inverse(s).image[t.image]
    pick = np.zeros(g.ncells, bool)
    for cyc in _cycles_of(pi):
        if len(cyc) < 2:
            continue
        stop = len(cyc) if len(cyc) % 2 == 0 else len(cyc) - 1
        pick[cyc[0:stop:2]] = True
    e = DyadicSet(g, pick)
    lower = (s.image_of(e) ^ t.image_of(e)).measure()
    return lower, metric_dprime(s, t)


def dyadic_squares(rank, geometry=None):
    """All dyadic squares of ``rank`` in row-major order, on ``geometry``."""
    g = geometry or GridGeometry.square(rank)
    if g.rank < rank:
        g = g.at_rank(rank)
    n = 1 << rank
    return [DyadicSet.square_cell(g, rank, c, r) for r in range(n) for c in range(n)]


@dataclass(frozen=True)
class Neighborhood:
    """Transformations ``s`` with ``m(center(E) ^ s(E)) < epsilon`` for every ``E``."""

    center: CellPermutation
    sets: tuple
    epsilon: object

    def __post_init__(self):
        if not Fraction(self.epsilon) > 0:
            raise PreconditionError("epsilon must be positive")
        if not self.sets:
            raise PreconditionError("a neighborhood needs at least one set")
        object.__setattr__(self, "sets", tuple(self.sets))


def square_neighborhood(center, rank, epsilon):
    """The neighborhood generated by all dyadic squares of ``rank``."""
    return Neighborhood(center, tuple(dyadic_squares(rank)), epsilon)


@dataclass(frozen=True)
class Membership:
    inside: bool
    deviations: tuple

    def __bool__(self):
        return self.inside

    @property
    def worst(self):
        return max(self.deviations)


def neighborhood_contains(nbhd, s):
    """Strict membership test with the deviation of every generating set."""
    if not nbhd.center.geometry.compatible(s.geometry):
        raise GeometryError("permutation and neighborhood live on incompatible grids")
    rank = max(nbhd.center.rank, s.rank, max(e.rank for e in nbhd.sets))
    c = nbhd.center.refine(rank)
    s = s.refine(rank)
    devs = []
    for e in nbhd.sets:
        e = e.refine(rank)
        devs.append((c.image_of(e) ^ s.image_of(e)).measure())
    eps = Fraction(nbhd.epsilon)
    return Membership(all(Fraction(d) < eps for d in devs), tuple(devs))


def perturb_off_extension(t, epsilon):
    """A measure-preserving map within ``epsilon`` of ``t`` that is not an extension.

    Picks two cells ``a1``, ``a2`` of row 0 in different columns, small enough
    that their union ``A`` has measure below ``epsilon``, and sets
    ``S(a1) = t(a2)``, ``S(a2) = t(a1)``, ``S = t`` elsewhere.  ``A`` is not a
    cylinder, so ``S`` splits the column of ``a1``.
    """
    project_to_base(t)
    epsilon = Fraction(epsilon)
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    if t.geometry.kind == "discrete" and t.geometry.rows < 2:
        raise PreconditionError("a single-row grid has only cylinder sets")
    rank = max(t.rank, 1)
    while 2 * Fraction(t.geometry.at_rank(rank).cell_measure(0)) >= epsilon:
        rank += 1
        if rank > settings.rank_cap:
            raise RankError(f"no two-cell set of measure < {epsilon} below the rank cap")
    t = t.refine(rank)
    g = t.geometry
    a1, a2 = g.cell_index((0, 0)), g.cell_index((1, 0))
    img = np.array(t.image)
    img[a1], img[a2] = t.image[a2], t.image[a1]
    return CellPermutation(g, img, check=False)


def _row_shuffles(rng, geometry):
    """One random row permutation per column, respecting level weights."""
    g = geometry
    classes = {}
    for r, w in enumerate(g.weights):
        classes.setdefault(Fraction(w), []).append(r)
    out = np.empty((g.columns, g.rows), np.int64)
    for c in range(g.columns):
        sigma = np.arange(g.rows)
        for rows in classes.values():
            rows = np.asarray(rows)
            sigma[rows] = rows[rng.permutation(len(rows))]
        out[c] = sigma
    return out


def _assemble(geometry, base, sigmas):
    g = geometry
    idx = np.arange(g.ncells)
    col = idx % g.columns
    row = idx // g.columns
    new_row = sigmas[col, row]
    return CellPermutation(g, new_row * g.columns + np.asarray(base)[col], check=False)


def random_column_preserving(rank, seed, geometry=None):
    """A uniformly random base permutation with independent random fibre maps.

    Deterministic for a fixed ``seed``.  ``geometry`` selects a discrete grid;
    by default the square grid of ``rank`` is used.
    """
    g = geometry.at_rank(rank) if geometry is not None else GridGeometry.square(rank)
    check_rank(rank)
    rng = np.random.default_rng(seed)
    base = rng.permutation(g.columns)
    return _assemble(g, base, _row_shuffles(rng, g))


def random_extension(geometry, seed, cycle_lengths):
    """A random extension whose base permutation has the given cycle type."""
    g = geometry
    if sum(cycle_lengths) != g.columns or any(c < 1 for c in cycle_lengths):
        raise PreconditionError(f"cycle lengths must be positive and sum to {g.columns}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(g.columns)
    base = np.empty(g.columns, np.int64)
    pos = 0
    for length in cycle_lengths:
        cyc = order[pos:pos + length]
        base[cyc] = np.roll(cyc, -1)
        pos += length
    return _assemble(g, base, _row_shuffles(rng, g))
