from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadext import (
    DyadicRational,
    DyadicSet,
    GridGeometry,
    Partition,
    PreconditionError,
    RankError,
    GeometryError,
    column_partition_match,
    partition_match,
    refine,
    symmetric_difference_measure,
)
from dyadext.config import rank_cap
from dyadext.dyadic import format_exact, parse_exact

dyadics = st.builds(DyadicRational, st.integers(-10**6, 10**6), st.integers(0, 40))


def random_set(g, seed, p=0.5):
    rng = np.random.default_rng(seed)
    return DyadicSet(g, rng.random((g.rows, g.columns)) < p)


class TestDyadicRational:
    def test_canonical_form(self):
        x = DyadicRational(12, 5)
        assert (x.numerator, x.exponent) == (3, 3)
        assert DyadicRational(0, 7).exponent == 0
        assert str(DyadicRational(-6, 2)) == "-3/2^1"

    def test_mixed_with_fraction(self):
        x = DyadicRational(1, 2)
        assert x + Fraction(1, 4) == DyadicRational(1, 1)
        assert isinstance(x + Fraction(1, 3), Fraction)
        assert x * 4 == 1
        assert x < Fraction(1, 3)

    def test_parse_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            DyadicRational.parse("1/3")
        assert parse_exact("1/3") == Fraction(1, 3)

    @given(dyadics, dyadics)
    def test_add_then_subtract(self, a, b):
        assert (a + b) - b == a

    @given(dyadics, dyadics)
    def test_agrees_with_fraction(self, a, b):
        fa, fb = a.to_fraction(), b.to_fraction()
        assert (a + b).to_fraction() == fa + fb
        assert (a * b).to_fraction() == fa * fb
        assert (a < b) == (fa < fb)
        assert hash(a) == hash(fa)

    @given(dyadics)
    def test_text_round_trip(self, a):
        assert DyadicRational.parse(str(a)) == a
        assert parse_exact(format_exact(a)) == a

    @given(dyadics)
    def test_canonical(self, a):
        # lowest terms: an even numerator only for integers
        assert a.numerator % 2 == 1 or a.exponent == 0


class TestSets:
    def test_refine_full_square(self):
        g = GridGeometry.square(0)
        full = refine(DyadicSet.full(g), 1)
        assert len(full) == 4 and full.measure() == 1

    def test_refine_single_cell(self):
        g = GridGeometry.square(1)
        cell = refine(DyadicSet.from_cells(g, [(1, 0)]), 2)
        assert len(cell) == 4 and cell.measure() == DyadicRational(1, 2)

    def test_refine_down_is_an_error(self):
        with pytest.raises(RankError):
            DyadicSet.full(GridGeometry.square(2)).refine(1)

    def test_rank_cap(self):
        with rank_cap(3):
            with pytest.raises(RankError):
                GridGeometry.square(4)

    def test_symmetric_difference_basics(self):
        g = GridGeometry.square(1)
        left = DyadicSet.cylinder(g, [0])
        bottom = DyadicSet.from_cells(g, [(0, 0), (1, 0)])
        assert symmetric_difference_measure(left, left) == 0
        assert symmetric_difference_measure(DyadicSet.full(g), DyadicSet.empty(g)) == 1
        assert symmetric_difference_measure(left, bottom) == DyadicRational(1, 1)

    def test_incompatible_weights(self):
        a = DyadicSet.full(GridGeometry.discrete(1, [Fraction(1, 2)] * 2))
        b = DyadicSet.full(GridGeometry.discrete(1, [Fraction(1, 4), Fraction(3, 4)]))
        with pytest.raises(GeometryError):
            symmetric_difference_measure(a, b)

    @given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**32 - 1))
    def test_refine_preserves_measure_and_region(self, rank, extra, seed):
        g = GridGeometry.square(rank)
        s = random_set(g, seed)
        fine = s.refine(rank + extra)
        assert fine.measure() == s.measure()
        f = 1 << extra
        for c, r in fine.cells():
            assert (c // f, r // f) in s
        assert fine == s

    @given(st.integers(0, 2), st.integers(0, 2**32 - 1))
    def test_discrete_refine(self, rank, seed):
        g = GridGeometry.discrete(rank, [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)])
        s = random_set(g, seed)
        assert s.refine(rank + 2).measure() == s.measure()

    @given(st.integers(1, 3), st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
    def test_symmetric_difference_is_symmetric(self, rank, s1, s2):
        g = GridGeometry.square(rank)
        a, b = random_set(g, s1), random_set(g.at_rank(rank - 1), s2)
        assert symmetric_difference_measure(a, b) == symmetric_difference_measure(b, a)
        assert (symmetric_difference_measure(a, b) == 0) == (a == b)


def _random_partition(g, n, seed):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n, size=g.ncells)
    return Partition.from_labels(g, labels, n)


class TestPartitionMatch:
    def test_identity_when_on_target(self):
        g = GridGeometry.square(2)
        p = _random_partition(g, 3, 1)
        out = partition_match(p, p.measures(), Fraction(1, 8))
        assert out == p

    def test_moves_one_cell(self):
        g = GridGeometry.square(1)
        p = Partition.from_labels(g, [0, 0, 0, 1])
        out = partition_match(p, [Fraction(1, 2), Fraction(1, 2)], Fraction(1, 2))
        assert out.measures() == [DyadicRational(1, 1), DyadicRational(1, 1)]
        assert symmetric_difference_measure(p[0], out[0]) == DyadicRational(1, 2)

    def test_rejects_bad_targets(self):
        g = GridGeometry.square(1)
        p = Partition.from_labels(g, [0, 0, 0, 1])
        with pytest.raises(PreconditionError):
            partition_match(p, [Fraction(1, 2), Fraction(1, 4)], Fraction(1, 2))
        with pytest.raises(PreconditionError):
            partition_match(p, [Fraction(1, 4), Fraction(3, 4)], Fraction(1, 4))
        with pytest.raises(RankError):
            partition_match(p, [Fraction(2, 3), Fraction(1, 3)], Fraction(1, 2))

    @given(st.integers(1, 3), st.integers(2, 5), st.integers(0, 2**32 - 1), st.integers(2, 5))
    def test_random_inputs(self, rank, n, seed, extra):
        g = GridGeometry.square(rank)
        p = _random_partition(g, n, seed)
        rng = np.random.default_rng(seed + 1)
        # perturb the measures by whole cells of a finer grid
        unit = Fraction(1, 4 ** (rank + extra))
        counts = [int(Fraction(m) / unit) for m in p.measures()]
        for _ in range(3):
            i, j = rng.integers(0, n, 2)
            if counts[i] > 0:
                counts[i] -= 1
                counts[j] += 1
        targets = [c * unit for c in counts]
        delta = max(abs(Fraction(m) - t) for m, t in zip(p.measures(), targets)) + unit
        out = partition_match(p, targets, delta)
        assert [Fraction(m) for m in out.measures()] == targets
        for a, b in zip(p, out):
            assert Fraction(symmetric_difference_measure(a, b)) < 2 * delta


class TestColumnPartitionMatch:
    def test_already_exact(self):
        g = GridGeometry.square(2)
        p = _random_partition(g, 2, 3)
        targets = [[p[i].column_measure(j) for j in range(4)] for i in range(2)]
        out = column_partition_match(p, p, targets, Fraction(1, 4))
        assert out == p

    def test_one_strip_moves(self):
        # block 0 owns column 0 of the rank-1 approximation but should hold 3/8
        # of it; exactly one rank-2 row strip (two rank-2 cells) changes hands
        g1 = GridGeometry.square(1)
        approx = Partition.from_labels(g1, [0, 1, 0, 1])
        g2 = GridGeometry.square(2)
        labels = np.ones((4, 4), int)
        labels[:3, :2] = 0
        blocks = Partition.from_labels(g2, labels.reshape(-1))
        targets = [[Fraction(3, 8), 0], [Fraction(1, 8), Fraction(1, 2)]]
        out = column_partition_match(blocks, approx, targets, Fraction(1, 4))
        moved = approx[0].refine(2) - out[0]
        assert sorted(moved.cells()) == [(0, 3), (1, 3)]
        assert column_mass(out[0], 1, 0) == Fraction(3, 8)
        assert out == blocks

    @given(st.integers(0, 2**32 - 1), st.integers(2, 4))
    def test_random_inputs(self, seed, n):
        K, fine = 2, 4
        blocks = _random_partition(GridGeometry.square(fine), n, seed)
        # plurality rounding to rank K gives the dyadic approximation
        lab = blocks.labels().reshape(16, 16)
        coarse = [
            np.bincount(lab[4 * r:4 * r + 4, 4 * c:4 * c + 4].ravel(), minlength=n).argmax()
            for r in range(4) for c in range(4)
        ]
        approx = Partition.from_labels(GridGeometry.square(K), coarse, n)
        # exact column masses in rank-8 units, rounded to multiples of 2^-6
        exact = np.array([[column_mass(b, K, j) * 256 for j in range(4)] for b in blocks], int)
        rounded = exact // 4
        for j in range(4):
            short = 16 - rounded[:, j].sum()
            for i in sorted(range(n), key=lambda i: -(exact[i, j] % 4))[:short]:
                rounded[i, j] += 1
        targets = [[Fraction(int(x), 64) for x in row] for row in rounded]
        eps = max(
            max(Fraction((b ^ a).measure()) for b, a in zip(blocks, approx)),
            4 * max(abs(Fraction(int(e), 256) - t)
                    for er, tr in zip(exact, targets) for e, t in zip(er, tr)),
        ) + Fraction(1, 1024)
        out = column_partition_match(blocks, approx, targets, eps)
        for i in range(n):
            assert [column_mass(out[i], K, j) for j in range(4)] == targets[i]
            assert Fraction((blocks[i] ^ out[i]).measure()) < 3 * eps


def column_mass(s, K, j):
    """Measure of a square-grid set inside rank-K column j."""
    f = s.geometry.columns >> K
    return Fraction(int(s.mask[:, j * f:(j + 1) * f].sum()), s.geometry.ncells)
