"""Grids of dyadic cells and finite unions of cells.

Two grid families share one type.  A *square* grid of rank ``k`` cuts the unit
square into ``2**k`` columns and ``2**k`` rows of equal height.  A *discrete*
grid of rank ``k`` has ``2**k`` columns and ``L`` levels, level ``i`` carrying
weight ``w_i``; it models ``[0, 1] x {1, ..., L}``.  Refining a square grid
subdivides both axes, refining a discrete grid subdivides only the columns.

Cells are addressed by ``(column, row)`` and stored row-major, so the flat
index of a cell is ``row * columns + column`` and the 1-based label used in
cycle notation is that index plus one.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .config import check_rank
from .dyadic import DyadicRational, as_exact, format_exact
from .errors import GeometryError, PreconditionError, RankError

__all__ = [
    "Cell",
    "GridGeometry",
    "DyadicSet",
    "Partition",
    "refine",
    "symmetric_difference_measure",
]


class Cell(NamedTuple):
    column: int
    row: int


@dataclass(frozen=True)
class GridGeometry:
    rank: int
    rows: int
    weights: tuple
    kind: str = "square"

    def __post_init__(self):
        if self.kind not in ("square", "discrete"):
            raise GeometryError(f"unknown grid kind {self.kind!r}")
        if self.rank < 0:
            raise RankError("rank must be non-negative")
        if len(self.weights) != self.rows:
            raise GeometryError("one weight per row is required")
        if any(w <= 0 for w in self.weights):
            raise GeometryError("level weights must be positive")
        if sum(self.weights, Fraction(0)) != 1:
            raise GeometryError("level weights must sum to 1")
        if self.kind == "square":
            if self.rows != 1 << self.rank:
                raise GeometryError("a square grid has 2**rank rows")
            if any(w != DyadicRational(1, self.rank) for w in self.weights):
                raise GeometryError("square grid rows have equal weight")

    @classmethod
    def square(cls, rank):
        check_rank(rank)
        w = DyadicRational(1, rank)
        return cls(rank, 1 << rank, (w,) * (1 << rank), "square")

    @classmethod
    def discrete(cls, rank, weights):
        check_rank(rank)
        ws = tuple(as_exact(Fraction(w)) for w in weights)
        return cls(rank, len(ws), ws, "discrete")

    @classmethod
    def uniform_discrete(cls, rank, levels):
        return cls.discrete(rank, [Fraction(1, levels)] * levels)

    @property
    def columns(self):
        return 1 << self.rank

    @property
    def ncells(self):
        return self.columns * self.rows

    @property
    def uniform(self):
        return len(set(self.weights)) == 1

    def cell_measure(self, row):
        return as_exact(Fraction(self.weights[row]) / self.columns)

    def cell_index(self, cell):
        column, row = cell
        if not (0 <= column < self.columns and 0 <= row < self.rows):
            raise GeometryError(f"cell {tuple(cell)} outside the grid")
        return row * self.columns + column

    def cell_at(self, index):
        return Cell(index % self.columns, index // self.columns)

    def label(self, cell):
        return self.cell_index(cell) + 1

    def compatible(self, other):
        if self.kind != other.kind:
            return False
        if self.kind == "discrete":
            return self.weights == other.weights
        return True

    def at_rank(self, rank):
        if rank == self.rank:
            return self
        if self.kind == "square":
            return GridGeometry.square(rank)
        return GridGeometry.discrete(rank, self.weights)

    def common(self, other):
        if not self.compatible(other):
            raise GeometryError(f"incompatible grids: {self} and {other}")
        return self.at_rank(max(self.rank, other.rank))

    def header(self):
        text = f"rank={self.rank} rows={self.rows}"
        if self.kind == "discrete":
            text += " weights=" + ",".join(format_exact(w) for w in self.weights)
        return text

    def measure_of_counts(self, row_counts):
        """Exact measure of a set given how many of its cells lie in each row."""
        if self.kind == "square" or self.uniform:
            total = int(np.sum(row_counts))
            return as_exact(Fraction(total) * Fraction(self.weights[0]) / self.columns)
        acc = Fraction(0)
        for w, n in zip(self.weights, row_counts):
            if n:
                acc += Fraction(w) * int(n)
        return as_exact(acc / self.columns)

    def column_of(self, index):
        return index % self.columns


def _expand(mask, geometry, rank):
    """Refine a (rows, columns) boolean mask to ``rank``."""
    d = rank - geometry.rank
    if d == 0:
        return mask
    f = 1 << d
    out = np.repeat(mask, f, axis=1)
    if geometry.kind == "square":
        out = np.repeat(out, f, axis=0)
    return out


class DyadicSet:
    """A finite union of cells of one grid.

    Immutable.  Set algebra and equality work across ranks by refining both
    operands to the larger rank, which keeps the region unchanged.
    """

    __slots__ = ("geometry", "_mask")

    def __init__(self, geometry, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (geometry.rows, geometry.columns):
            mask = mask.reshape(geometry.rows, geometry.columns)
        mask = mask.copy()
        mask.flags.writeable = False
        self.geometry = geometry
        self._mask = mask

    @classmethod
    def empty(cls, geometry):
        return cls(geometry, np.zeros((geometry.rows, geometry.columns), bool))

    @classmethod
    def full(cls, geometry):
        return cls(geometry, np.ones((geometry.rows, geometry.columns), bool))

    @classmethod
    def from_cells(cls, geometry, cells):
        mask = np.zeros((geometry.rows, geometry.columns), bool)
        for c in cells:
            column, row = c
            geometry.cell_index((column, row))
            mask[row, column] = True
        return cls(geometry, mask)

    @classmethod
    def from_indices(cls, geometry, indices):
        flat = np.zeros(geometry.ncells, bool)
        flat[np.asarray(list(indices), dtype=np.int64)] = True
        return cls(geometry, flat)

    @classmethod
    def cylinder(cls, geometry, columns):
        """The union of the given full columns."""
        mask = np.zeros((geometry.rows, geometry.columns), bool)
        mask[:, list(columns)] = True
        return cls(geometry, mask)

    @classmethod
    def square_cell(cls, geometry, rank, column, row):
        """The dyadic square of the given (coarser) rank, on ``geometry``."""
        if geometry.kind != "square":
            raise GeometryError("dyadic squares need a square grid")
        if rank > geometry.rank:
            raise RankError("square is finer than the grid")
        f = 1 << (geometry.rank - rank)
        mask = np.zeros((geometry.rows, geometry.columns), bool)
        mask[row * f:(row + 1) * f, column * f:(column + 1) * f] = True
        return cls(geometry, mask)

    @property
    def mask(self):
        return self._mask

    @property
    def flat(self):
        return self._mask.reshape(-1)

    @property
    def rank(self):
        return self.geometry.rank

    def indices(self):
        return np.flatnonzero(self.flat)

    def cells(self):
        cols = self.geometry.columns
        return [Cell(int(i % cols), int(i // cols)) for i in self.indices()]

    def __len__(self):
        return int(self._mask.sum())

    def __iter__(self):
        return iter(self.cells())

    def __contains__(self, cell):
        column, row = cell
        return bool(self._mask[row, column])

    def measure(self):
        return self.geometry.measure_of_counts(self._mask.sum(axis=1))

    def column_measure(self, column):
        counts = self._mask[:, column].astype(np.int64)
        if self.geometry.kind == "square" or self.geometry.uniform:
            return self.geometry.measure_of_counts([int(counts.sum())])
        return self.geometry.measure_of_counts(counts)

    def columns_touched(self):
        return [int(c) for c in np.flatnonzero(self._mask.any(axis=0))]

    def is_cylinder(self):
        col_any = self._mask.any(axis=0)
        col_all = self._mask.all(axis=0)
        return bool(np.array_equal(col_any, col_all))

    def refine(self, rank):
        if rank < self.rank:
            raise RankError(
                f"cannot refine a rank-{self.rank} set down to rank {rank}"
            )
        check_rank(rank)
        geom = self.geometry.at_rank(rank)
        return DyadicSet(geom, _expand(self._mask, self.geometry, rank))

    def _aligned(self, other):
        geom = self.geometry.common(other.geometry)
        return (
            geom,
            _expand(self._mask, self.geometry, geom.rank),
            _expand(other._mask, other.geometry, geom.rank),
        )

    def __or__(self, other):
        g, a, b = self._aligned(other)
        return DyadicSet(g, a | b)

    def __and__(self, other):
        g, a, b = self._aligned(other)
        return DyadicSet(g, a & b)

    def __sub__(self, other):
        g, a, b = self._aligned(other)
        return DyadicSet(g, a & ~b)

    def __xor__(self, other):
        g, a, b = self._aligned(other)
        return DyadicSet(g, a ^ b)

    def complement(self):
        return DyadicSet(self.geometry, ~self._mask)

    def __eq__(self, other):
        if not isinstance(other, DyadicSet):
            return NotImplemented
        if not self.geometry.compatible(other.geometry):
            return False
        _, a, b = self._aligned(other)
        return bool(np.array_equal(a, b))

    def __hash__(self):
        # hash the coarsest form so equal regions hash alike across ranks
        c = self.coarsest()
        return hash((c.geometry, c._mask.tobytes()))

    def coarsest(self):
        """The same region at the smallest rank that represents it."""
        s = self
        while s.rank > 0:
            m = s._mask
            if s.geometry.kind == "square":
                blocks = m.reshape(s.geometry.rows // 2, 2, s.geometry.columns // 2, 2)
                coarse = blocks[:, 0, :, 0]
                ok = (blocks == coarse[:, None, :, None]).all()
            else:
                blocks = m.reshape(s.geometry.rows, s.geometry.columns // 2, 2)
                coarse = blocks[:, :, 0]
                ok = (blocks == coarse[:, :, None]).all()
            if not ok:
                break
            s = DyadicSet(s.geometry.at_rank(s.rank - 1), coarse)
        return s

    def __repr__(self):
        return f"DyadicSet({self.geometry.header()}, cells={len(self)})"


def refine(dset, target_rank):
    """Express ``dset`` on the finer grid of rank ``target_rank``."""
    return dset.refine(target_rank)


def symmetric_difference_measure(a, b):
    """Exact measure of ``a`` symmetric-difference ``b``."""
    if not a.geometry.compatible(b.geometry):
        raise GeometryError("sets live on incompatible grids")
    return (a ^ b).measure()


class Partition:
    """Pairwise disjoint dyadic sets covering the whole grid.

    All blocks are stored at one common rank.
    """

    __slots__ = ("geometry", "blocks")

    def __init__(self, blocks, geometry=None):
        blocks = list(blocks)
        if not blocks:
            raise GeometryError("a partition needs at least one block")
        geom = geometry or blocks[0].geometry
        for b in blocks:
            geom = geom.common(b.geometry)
        blocks = tuple(b.refine(geom.rank) for b in blocks)
        total = np.zeros((geom.rows, geom.columns), np.int64)
        for b in blocks:
            total += b.mask
        if (total > 1).any():
            raise PreconditionError("partition blocks overlap")
        if (total < 1).any():
            raise PreconditionError("partition blocks do not cover the grid")
        self.geometry = geom
        self.blocks = blocks

    @classmethod
    def from_labels(cls, geometry, labels, n=None):
        """Build from an array giving each cell's block number.

        ``n`` fixes the block count so that trailing blocks may be empty.
        """
        labels = np.asarray(labels).reshape(geometry.rows, geometry.columns)
        if n is None:
            n = int(labels.max()) + 1
        return cls([DyadicSet(geometry, labels == i) for i in range(n)], geometry)

    def labels(self):
        out = np.full(self.geometry.ncells, -1, np.int64)
        for i, b in enumerate(self.blocks):
            out[b.flat] = i
        return out

    def refine(self, rank):
        return Partition([b.refine(rank) for b in self.blocks])

    def measures(self):
        return [b.measure() for b in self.blocks]

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, i):
        return self.blocks[i]

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return len(self) == len(other) and all(
            a == b for a, b in zip(self.blocks, other.blocks)
        )

    __hash__ = None

    def __repr__(self):
        return f"Partition({self.geometry.header()}, blocks={len(self)})"
