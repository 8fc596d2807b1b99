"""Cylinder towers and the constructions built on them.

A tower of height ``n`` for a column-preserving ``t`` is a set of full
columns ``E`` whose images ``E, tE, ..., t^(n-1)E`` are pairwise disjoint.
Because ``t`` permutes columns, every level is again a set of full columns
and towers can be read off the cycles of the base permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .approx import wate
from .dyadic import DyadicRational
from .errors import ConstructionError, CoverageInfeasible, PreconditionError
from .grid import DyadicSet
from .perms import (
    CellPermutation,
    compose,
    inverse,
    metric_dprime,
    neighborhood_contains,
    power,
    project_to_base,
    square_neighborhood,
)

__all__ = [
    "Tower",
    "ConjugacyResult",
    "periodic_base",
    "rokhlin_base",
    "uate",
    "conjugacy",
]


@dataclass(frozen=True)
class Tower:
    base: DyadicSet
    height: int
    levels: tuple
    residual: DyadicSet
    # base columns of every level, level by level
    level_columns: tuple = field(repr=False)

    @property
    def coverage(self):
        return sum((lv.measure() for lv in self.levels), DyadicRational(0))


def _tower(t, n, base_columns):
    base = project_to_base(t)
    cols = list(base_columns)
    level_columns = []
    for _ in range(n):
        level_columns.append(tuple(cols))
        cols = [base(c) for c in cols]
    g = t.geometry
    levels = tuple(DyadicSet.cylinder(g, lc) for lc in level_columns)
    covered = DyadicSet.empty(g)
    for lv in levels:
        if (covered & lv).measure():
            raise ConstructionError("tower levels overlap")
        covered = covered | lv
    return Tower(levels[0], n, levels, covered.complement(), tuple(level_columns))


def periodic_base(t, n):
    """A tower of height ``n`` that partitions the grid.

    Every base cycle must have length exactly ``n``; the base takes the
    smallest column of each cycle.
    """
    if n < 1:
        raise PreconditionError("height must be positive")
    cycles = project_to_base(t).cycles()
    bad = [len(c) for c in cycles if len(c) != n]
    if bad:
        raise PreconditionError(f"base has cycles of length {sorted(set(bad))}, not all {n}")
    return _tower(t, n, sorted(min(c) for c in cycles))


def _rokhlin_columns(t, n):
    base_cols = []
    for cyc in project_to_base(t).cycles():
        for j in range(len(cyc) // n):
            base_cols.append(cyc[j * n])
    return sorted(base_cols)


def rokhlin_base(t, n, epsilon):
    """A tower of height ``n`` covering more than ``1 - epsilon``.

    Along each base cycle (starting at its smallest column) the base takes
    the columns at positions ``0, n, 2n, ...`` while a full run of ``n``
    still fits.  That is the largest coverage any cylinder tower can reach,
    so when it falls short :class:`CoverageInfeasible` reports it as ``best``.
    """
    if n < 1:
        raise PreconditionError("height must be positive")
    epsilon = Fraction(epsilon)
    base = project_to_base(t)
    total = sum(len(c) // n * n for c in base.cycles())
    best = DyadicRational(total, t.rank)
    if not best > 1 - epsilon:
        raise CoverageInfeasible(
            f"height {n} covers at most {best}, not more than 1 - {epsilon}", best
        )
    return _tower(t, n, _rokhlin_columns(t, n))


@dataclass
class UateResult:
    r: CellPermutation
    tower: Tower
    dprime: DyadicRational
    trace: list = field(default_factory=list)

    def __iter__(self):
        yield self.r
        yield self.tower


def uate(t, n, epsilon):
    """A period-``n`` extension ``R`` with ``d'(R, t) <= 1/n + epsilon``.

    ``R`` follows ``t`` up the tower of :func:`rokhlin_base` and sends the top
    level back to the base by ``t^-(n-1)``.  Residual columns are taken in
    cycle order, grouped in runs of ``n`` and rotated along each run with
    every row fixed; fewer than ``n`` left-over columns stay fixed.
    """
    tower = rokhlin_base(t, n, epsilon)
    g = t.geometry
    cols = g.columns
    image = np.array(t.image)
    top = tower.levels[-1].flat
    back = power(t, -(n - 1)).image
    image[top] = back[top]

    in_tower = np.zeros(cols, bool)
    for lc in tower.level_columns:
        in_tower[list(lc)] = True
    leftover = [c for cyc in project_to_base(t).cycles() for c in cyc if not in_tower[c]]
    rows = np.arange(g.rows) * cols
    fixed = 0
    for start in range(0, len(leftover), n):
        run = leftover[start:start + n]
        if len(run) < n:
            fixed = len(run)
            for c in run:
                image[rows + c] = rows + c
            break
        for a, b in zip(run, run[1:] + run[:1]):
            image[rows + a] = rows + b
    r = CellPermutation(g, image)
    dp = metric_dprime(r, t)
    trace = [
        f"height n={n}, tower coverage {tower.coverage}",
        f"residual columns {len(leftover)}, rotated in runs of {n}, fixed {fixed}",
        f"d'(R,t)={dp}",
    ]
    return UateResult(r, tower, dp, trace)


@dataclass
class ConjugacyResult:
    s: CellPermutation
    conjugate: CellPermutation
    q: CellPermutation
    r: CellPermutation
    k: int
    deviations: tuple
    trace: list = field(default_factory=list)

    def __iter__(self):
        yield self.s
        yield self.conjugate


def _conjugacy_rank(nbhd_rank, epsilon):
    k = max(nbhd_rank + 1, 2)
    while not Fraction(1, 2 ** (k - 2)) < epsilon:
        k += 1
    return k


def conjugacy(target, t0, nbhd_rank, epsilon):
    """An extension ``s`` with ``s^-1 t0 s`` close to ``target`` on rank-``nbhd_rank`` squares.

    ``Q = wate(target, epsilon/2)`` is a cyclic approximation of the target and
    ``R = uate(t0, 2**k, 2**-k)`` a periodic approximation of ``t0`` with the
    same period.  ``s`` carries the column tower of ``Q`` onto the tower of
    ``R`` level by level, so ``s^-1 R s = Q`` exactly; that identity is
    checked before returning.
    """
    epsilon = Fraction(epsilon)
    if not epsilon > 0:
        raise PreconditionError("epsilon must be positive")
    target = target.coarsest()
    project_to_base(target)
    project_to_base(t0)
    k0 = _conjugacy_rank(nbhd_rank, epsilon)
    w = wate(target, epsilon / 2, k0)
    k = w.k
    n = 1 << k
    if t0.rank < k:
        t0 = t0.refine(k)
    u = uate(t0, n, Fraction(1, n))
    rank = max(k, u.r.rank)
    q = w.q.refine(rank)
    r = u.r.refine(rank)
    t0 = t0.refine(rank)
    g = q.geometry

    # tower of Q: E_0 is the rank-k column 0, E_i = Q^i E_0
    sub = 1 << (rank - k)
    e0_cols = list(range(sub))
    try:
        f_tower = periodic_base(r, n)
    except PreconditionError as exc:
        raise PreconditionError(
            f"the period-{n} approximation of t0 leaves columns of shorter period: {exc}"
        ) from exc
    f0_cols = list(f_tower.level_columns[0])
    if len(f0_cols) != len(e0_cols):
        raise ConstructionError("tower bases differ in size")

    rows = np.arange(g.rows) * g.columns
    z = np.concatenate([rows + c for c in e0_cols])
    wv = np.concatenate([rows + c for c in f0_cols])
    s_img = np.full(g.ncells, -1, np.int64)
    s_img[z] = wv
    for _ in range(1, n):
        z = q.image[z]
        wv = r.image[wv]
        s_img[z] = wv
    if (s_img < 0).any():
        raise ConstructionError("the towers of Q and R do not cover the grid")
    s = CellPermutation(g, s_img)
    if compose(inverse(s), r, s) != q:
        raise ConstructionError("Q = S^-1 R S failed")
    conj = compose(inverse(s), t0, s)

    member = neighborhood_contains(square_neighborhood(target, nbhd_rank, epsilon), conj)
    q_dev = neighborhood_contains(square_neighborhood(target, nbhd_rank, epsilon), q)
    dq = metric_dprime(q, conj)
    triangle = all(
        Fraction(a) <= Fraction(b) + Fraction(dq)
        for a, b in zip(member.deviations, q_dev.deviations)
    )
    if not triangle:
        raise ConstructionError("triangle bound through Q failed")
    trace = [
        f"k0={k0}, wate k={k}, base cycles K={w.cycles}",
        f"uate height {n}: d'(R,t0)={u.dprime}",
        f"working rank {rank}",
        "Q = S^-1 R S verified",
        f"d'(Q, S^-1 T0 S)={dq}, max deviation of Q {max(q_dev.deviations)}",
        f"max deviation of S^-1 T0 S {max(member.deviations)}, inside: {member.inside}",
    ]
    return ConjugacyResult(s, conj, q, r, k, member.deviations, trace)
