"""Adjusting a partition so its blocks hit prescribed dyadic measures.

``partition_match`` moves whole cells between blocks until every block has its
target measure.  ``column_partition_match`` does the same column by column and
only ever moves full-width horizontal strips of a column, which is what lets
two partitions be matched cell-for-cell inside every column afterwards.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .config import settings
from .dyadic import DyadicRational
from .errors import ConstructionError, GeometryError, PreconditionError, RankError
from .grid import Partition

__all__ = ["partition_match", "column_partition_match"]


def _as_dyadic(value, what):
    try:
        return DyadicRational.from_rational(Fraction(value))
    except ValueError as exc:
        raise RankError(
            f"{what} {value} is not representable at any dyadic refinement"
        ) from exc


def _working_rank(geometry, targets):
    """Smallest rank >= the grid's at which every target is a whole number of cells."""
    for rank in range(geometry.rank, settings.rank_cap + 1):
        g = geometry.at_rank(rank)
        per_cell = Fraction(g.weights[0]) / g.columns
        if all((Fraction(t) / per_cell).denominator == 1 for t in targets):
            return rank
    raise RankError("targets need a rank above the rank cap")


def partition_match(blocks, targets, delta):
    """Return a dyadic partition whose i-th block has measure ``targets[i]``.

    Blocks that are too large give up their highest-indexed cells to a pool;
    blocks that are too small take the lowest-indexed cells from it.  Each
    block changes by exactly ``|m(E_i) - r_i|``, which is below ``delta``, so
    the guaranteed bound ``m(E_i ^ F_i) < 2 * delta`` holds with room to spare.
    """
    geom = blocks.geometry
    if not geom.uniform:
        raise PreconditionError("cell transfer needs cells of equal measure")
    if len(targets) != len(blocks):
        raise PreconditionError("one target per block is required")
    targets = [_as_dyadic(t, "target") for t in targets]
    if any(t < 0 for t in targets):
        raise PreconditionError("targets must be non-negative")
    if sum(targets, DyadicRational(0)) != 1:
        raise PreconditionError("targets must sum to 1")
    delta = Fraction(delta)
    measures = blocks.measures()
    for i, (m, r) in enumerate(zip(measures, targets)):
        if not abs(Fraction(m) - Fraction(r)) < delta:
            raise PreconditionError(
                f"block {i}: |m(E) - r| = {abs(Fraction(m) - Fraction(r))} is not < {delta}"
            )

    rank = _working_rank(geom, targets)
    part = blocks.refine(rank)
    g = part.geometry
    cell = Fraction(g.weights[0]) / g.columns
    want = [int(Fraction(t) / cell) for t in targets]

    labels = part.labels()
    pool = []
    for i, b in enumerate(part.blocks):
        idx = b.indices()
        surplus = len(idx) - want[i]
        if surplus > 0:
            pool.extend(int(x) for x in idx[len(idx) - surplus:])
    pool.sort()
    pos = 0
    for i, b in enumerate(part.blocks):
        deficit = want[i] - len(b)
        if deficit > 0:
            take = pool[pos:pos + deficit]
            pos += deficit
            labels[take] = i
    if pos != len(pool):
        raise ConstructionError("cell pool not exhausted")
    return Partition.from_labels(g, labels, len(targets))


def column_partition_match(blocks, approx, column_targets, epsilon):
    """Column-exact refinement of a dyadic approximation of a partition.

    ``approx`` must be a dyadic partition of rank ``K`` with
    ``m(E_i ^ approx_i) < epsilon``.  ``column_targets[i][j]`` is the mass block
    ``i`` must have in rank-``K`` column ``j``; each column's targets sum to the
    column's mass ``2**-K`` and lie within ``epsilon / 2**K`` of
    ``m(E_i & column_j)``.  In every column, over-full blocks shed full-width
    strips (highest rows first) and under-full blocks absorb strips from that column's
    shed pool, so the result satisfies ``m(F_i & column_j) = column_targets[i][j]``
    exactly and ``m(E_i ^ F_i) < 3 * epsilon``.
    """
    if approx.geometry.kind != "square" or blocks.geometry.kind != "square":
        raise GeometryError("strip transfer subdivides rows; square grids only")
    if len(blocks) != len(approx):
        raise PreconditionError("partitions differ in block count")
    K = approx.geometry.rank
    ncols = 1 << K
    n = len(approx)
    if len(column_targets) != n or any(len(row) != ncols for row in column_targets):
        raise PreconditionError(f"column targets must be {n} x {ncols}")
    r = [[_as_dyadic(v, "column target") for v in row] for row in column_targets]
    epsilon = Fraction(epsilon)
    colmass = DyadicRational(1, K)
    for j in range(ncols):
        if any(r[i][j] < 0 for i in range(n)):
            raise PreconditionError("column targets must be non-negative")
        if sum((r[i][j] for i in range(n)), DyadicRational(0)) != colmass:
            raise PreconditionError(f"column {j}: targets do not sum to 2^-{K}")

    # hypotheses, evaluated on a common grid
    common = blocks.geometry.common(approx.geometry).rank
    E = blocks.refine(common)
    Ft = approx.refine(common)
    f = 1 << (common - K)
    bound = epsilon / ncols
    cell = Fraction(1, 4 ** common)
    for i in range(n):
        if not Fraction((E[i] ^ Ft[i]).measure()) < epsilon:
            raise PreconditionError(f"block {i}: approximation is not within epsilon")
        m = E[i].mask
        for j in range(ncols):
            mij = int(m[:, j * f:(j + 1) * f].sum()) * cell
            if not abs(mij - Fraction(r[i][j])) < bound:
                raise PreconditionError(
                    f"block {i}, column {j}: target is not within epsilon/2^K"
                )

    # rows fine enough that each target is a whole number of strips;
    # a strip of one row at rank KK inside a rank-K column has measure 2^-(K+KK)
    top = max(r[i][j].exponent for i in range(n) for j in range(ncols))
    KK = max(K, top - K)
    if KK > settings.rank_cap:
        raise RankError("column targets need rows finer than the rank cap")

    fine = approx.refine(KK)
    g = fine.geometry
    sub = 1 << (KK - K)
    labels = np.full((g.rows, g.columns), -1, np.int64)
    for j in range(ncols):
        cols = slice(j * sub, (j + 1) * sub)
        rows_of = []
        for i in range(n):
            block = fine[i].mask[:, cols]
            full_rows = block.all(axis=1)
            if not np.array_equal(full_rows, block.any(axis=1)):
                raise PreconditionError(
                    f"approximation block {i} is not a product set in column {j}"
                )
            rows_of.append(list(np.flatnonzero(full_rows)))
        want = [r[i][j].scaled(K + KK) for i in range(n)]
        pool = []
        for i in range(n):
            extra = len(rows_of[i]) - want[i]
            if extra > 0:
                pool.extend(rows_of[i][-extra:])
                rows_of[i] = rows_of[i][:-extra]
        pool.sort()
        pos = 0
        for i in range(n):
            short = want[i] - len(rows_of[i])
            if short > 0:
                rows_of[i] = rows_of[i] + pool[pos:pos + short]
                pos += short
        if pos != len(pool):
            raise ConstructionError(f"column {j}: strip pool not exhausted")
        for i in range(n):
            labels[rows_of[i], cols] = i

    out = Partition.from_labels(g, labels, n)
    for i in range(n):
        if not Fraction((E[i] ^ out[i]).measure()) < 3 * epsilon:
            raise ConstructionError(f"block {i}: 3*epsilon bound violated")
    return out
