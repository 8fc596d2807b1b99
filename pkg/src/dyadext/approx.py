"""Approximating permutations of the square by column-preserving ones.

``approximate_by_column_permutation`` returns a coarser column-preserving
permutation that moves every dyadic square of a chosen rank almost exactly as
the input does.  ``wate`` turns a column-preserving permutation into one whose
base is a single cycle and whose cells all have the same period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .config import check_rank, settings
from .dyadic import DyadicRational
from .errors import GeometryError, PreconditionError, RankError
from .grid import DyadicSet, GridGeometry, Partition
from .matching import column_partition_match, partition_match
from .perms import (
    CellPermutation,
    compose,
    dyadic_squares,
    inverse,
    project_to_base,
)

__all__ = [
    "ApproxResult",
    "WateResult",
    "approximate_by_column_permutation",
    "square_deviations",
    "wate",
]


def square_deviations(t, q, rank):
    """``m(tD ^ qD)`` for every dyadic square ``D`` of ``rank``, row-major."""
    return [(t.image_of(d) ^ q.image_of(d)).measure() for d in dyadic_squares(rank)]


@dataclass
class ApproxResult:
    q: CellPermutation
    working_rank: int
    deviations: list
    trace: list = field(default_factory=list)

    def __iter__(self):
        yield self.q
        yield self.deviations


def _plurality(labels, n, fine_rank, rank):
    """Assign every rank-``rank`` cell to the block owning most of it."""
    d = fine_rank - rank
    side = 1 << fine_rank
    idx = np.arange(side * side)
    coarse = ((idx // side) >> d) * (1 << rank) + ((idx % side) >> d)
    counts = np.bincount(coarse * n + labels, minlength=(4 ** rank) * n)
    return counts.reshape(-1, n).argmax(axis=1)


def _column_counts(labels, n, rank, fine_rank):
    """cells[i, k]: fine cells of block ``i`` in rank-``rank`` column ``k``."""
    side = 1 << fine_rank
    col = (np.arange(side * side) % side) >> (fine_rank - rank)
    counts = np.bincount(labels * (1 << rank) + col, minlength=n << rank)
    return counts.reshape(n, 1 << rank)


def _apportion(cells, fine_rank, rank):
    """Round block masses in each column to multiples of ``4**-rank``.

    Largest-remainder rounding keeps every column total at ``2**-rank``.
    Returns integer counts of rank-``rank`` cells.
    """
    scale = 4 ** (fine_rank - rank)
    q, rem = np.divmod(cells, scale)
    out = q.copy()
    per_col = 1 << rank
    for k in range(cells.shape[1]):
        missing = per_col - int(q[:, k].sum())
        order = sorted(range(cells.shape[0]), key=lambda i: (-int(rem[i, k]), i))
        for i in order[:missing]:
            out[i, k] += 1
    return out


def _match_side(labels, n, fine_rank, rank, counts):
    """Dyadic rank-``rank`` partition with ``counts[i, k]`` cells of block i in column k."""
    g_fine = GridGeometry.square(fine_rank)
    g = GridGeometry.square(rank)
    blocks = Partition.from_labels(g_fine, labels, n)
    rough = Partition.from_labels(g, _plurality(labels, n, fine_rank, rank), n)

    cell = DyadicRational(1, 2 * rank)
    totals = [cell * int(c) for c in counts.sum(axis=1)]
    gap = max(abs(Fraction(m) - Fraction(t)) for m, t in zip(rough.measures(), totals))
    tiny = Fraction(1, 4 ** (fine_rank + 1))
    matched = partition_match(rough, totals, gap + tiny)

    column_targets = [[cell * int(c) for c in row] for row in counts]
    fine_cells = _column_counts(labels, n, rank, fine_rank)
    col_gap = max(
        abs(Fraction(int(fine_cells[i, k]), 4 ** fine_rank) - Fraction(column_targets[i][k]))
        for i in range(n) for k in range(1 << rank)
    )
    sym_gap = max(Fraction((b ^ f).measure()) for b, f in zip(blocks, matched))
    eps = max(sym_gap, col_gap * (1 << rank)) + tiny
    return column_partition_match(blocks, matched, column_targets, eps)


def _fibre_identity_approx(tt, nbhd_rank, rank):
    """Approximate an extension of the identity at working rank ``rank``.

    Blocks ``D_ij = D_i & tt(D_j)`` and ``G_ij = tt^-1(D_ij)`` carry equal mass
    in every column, so after matching both families to the same column
    targets a map sending each ``F_ij`` onto ``E_ij`` inside every column can
    be built.  Cells are paired in row order.
    """
    r = tt.rank
    g = tt.geometry
    side = 1 << r
    idx = np.arange(g.ncells)
    d = r - nbhd_rank
    sq = ((idx // side) >> d) * (1 << nbhd_rank) + ((idx % side) >> d)
    nsq = 4 ** nbhd_rank
    pre = np.empty_like(tt.image)
    pre[tt.image] = idx
    # cell z lies in D_i & tt(D_j) with i = sq[z], j = sq[tt^-1 z]
    d_lab = sq * nsq + sq[pre]
    # cell z lies in G_ij when tt z lies in D_ij
    g_lab = d_lab[tt.image]
    used = np.unique(d_lab)
    remap = np.full(nsq * nsq, -1, np.int64)
    remap[used] = np.arange(len(used))
    n = len(used)
    d_lab, g_lab = remap[d_lab], remap[g_lab]

    cells = _column_counts(d_lab, n, rank, r)
    counts = _apportion(cells, r, rank)
    e_side = _match_side(d_lab, n, r, rank, counts)
    f_side = _match_side(g_lab, n, r, rank, counts)

    ge = e_side.geometry
    e_lab = e_side.labels().reshape(ge.rows, ge.columns)
    f_lab = f_side.labels().reshape(ge.rows, ge.columns)
    image = np.empty(ge.ncells, np.int64)
    for col in range(ge.columns):
        for b in range(n):
            src = np.flatnonzero(f_lab[:, col] == b)
            dst = np.flatnonzero(e_lab[:, col] == b)
            image[src * ge.columns + col] = dst * ge.columns + col
    return CellPermutation(ge, image)


def approximate_by_column_permutation(t, nbhd_rank, epsilon):
    """A column-preserving ``Q`` with ``m(tD ^ QD) < epsilon`` on rank-``nbhd_rank`` squares.

    ``t`` is first reduced to ``(t')^-1 t``, an extension of the identity.
    That map is approximated at the coarsest working rank that achieves the
    bound, and ``t'`` is composed back on.  Returns an :class:`ApproxResult`
    that unpacks as ``(q, deviations)``.
    """
    if t.geometry.kind != "square":
        raise GeometryError("the strip construction needs the square grid")
    epsilon = Fraction(epsilon)
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    check_rank(nbhd_rank, "neighborhood rank")
    base = project_to_base(t)
    r = max(t.rank, nbhd_rank)
    t = t.refine(r)
    lift = base.coarsest().lift(GridGeometry.square(0))
    tt = compose(inverse(lift), t)
    trace = [f"input rank {r}, base {base.coarsest()!r}"]
    for rank in range(nbhd_rank, r + 1):
        qt = _fibre_identity_approx(tt, nbhd_rank, rank)
        q = compose(lift, qt)
        q = CellPermutation(q.geometry, q.image).coarsest()
        devs = square_deviations(t, q, nbhd_rank)
        worst = max(Fraction(x) for x in devs)
        trace.append(f"working rank {rank}: worst deviation {worst}")
        if worst < epsilon:
            return ApproxResult(q, rank, devs, trace)
    # at rank r the construction reproduces every square image exactly
    raise RankError(f"no working rank up to {r} reaches epsilon {epsilon}")


@dataclass
class WateResult:
    q: CellPermutation
    k: int
    cycles: int
    bound: DyadicRational
    deviations: list
    trace: list = field(default_factory=list)

    def __iter__(self):
        yield self.q
        yield self.k


def _wate_rank(n_cycles, epsilon, low):
    k = low
    while not Fraction(n_cycles, 2 ** (k - 1)) < epsilon:
        k += 1
    if k > settings.rank_cap:
        raise RankError(f"rank {k} needed for epsilon {epsilon} exceeds the cap")
    return k


def wate(p, epsilon, k0=1, cyclic=False):
    """Cyclic approximation of a column-preserving permutation.

    Let ``M`` be the rank of ``p`` and ``K`` the number of cycles of its base.
    The result ``q`` has rank ``k``, the least integer ``>= max(M, k0)`` with
    ``K / 2**(k-1) < epsilon``.  Its base is one ``2**k``-cycle, every cell
    has period ``2**k`` and every square of rank ``M`` is moved within
    ``K / 2**(k-1)`` of where ``p`` moves it.

    Cells are visited in passes.  A pass starts in one ``k``-row of the first
    base cycle's first column and, for each base cycle in turn, follows the
    ``p``-orbit of the ``M``-square it started in, stepping one ``k``-column
    to the right after every trip round the cycle.  With ``cyclic=True`` the
    passes are chained into one cycle through all cells.
    """
    if p.geometry.kind != "square":
        raise GeometryError("the snake walk subdivides rows; square grids only")
    epsilon = Fraction(epsilon)
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    if k0 < 1:
        raise PreconditionError("k0 must be at least 1")
    p = p.coarsest()
    base = project_to_base(p)
    M = p.rank
    base_cycles = sorted(base.cycles(), key=min)
    K = len(base_cycles)
    k = _wate_rank(K, epsilon, max(M, k0))
    s = 1 << (k - M)
    cols_m = 1 << M
    cols_k = 1 << k
    pimg = p.image

    passes = []
    for start in range(cols_k):
        m_row, b = divmod(start, s)
        walk = []
        for cyc in base_cycles:
            length = len(cyc)
            e = m_row * cols_m + cyc[0]
            for j in range(length * s):
                er, ec = divmod(e, cols_m)
                walk.append((er * s + b) * cols_k + ec * s + j // length)
                e = int(pimg[e])
        passes.append(walk)

    image = np.empty(cols_k * cols_k, np.int64)
    for n, walk in enumerate(passes):
        image[walk[:-1]] = walk[1:]
        if cyclic:
            image[walk[-1]] = passes[(n + 1) % cols_k][0]
        else:
            image[walk[-1]] = walk[0]
    q = CellPermutation(GridGeometry.square(k), image)

    bound = DyadicRational(K, k - 1)
    devs = square_deviations(p, q, M)
    trace = [
        f"base rank M={M}, base cycles K={K}",
        "cycle order: " + " ".join("(" + " ".join(str(x + 1) for x in c) + ")" for c in base_cycles),
        f"chosen k={k}, bound K/2^(k-1)={bound}",
        "square deviations: " + " ".join(str(d) for d in devs),
    ]
    return WateResult(q, k, K, bound, devs, trace)
