from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from dyadext import (
    CellPermutation,
    DyadicRational,
    DyadicSet,
    GeometryError,
    GridGeometry,
    IntervalPermutation,
    Neighborhood,
    NotColumnPreserving,
    RankError,
    TooLarge,
    compose,
    fiber_action,
    inverse,
    metric_d_bounds,
    metric_d_bruteforce,
    metric_dprime,
    neighborhood_contains,
    perturb_off_extension,
    power,
    project_to_base,
    random_column_preserving,
    random_extension,
)
from dyadext.perms import dyadic_squares, square_neighborhood

SAMPLE_P = [[1, 11, 5, 3], [13, 15], [9, 7], [2, 6, 14], [4, 16, 12, 8]]

seeds = st.integers(0, 2**32 - 1)
ranks = st.integers(0, 3)


def sample_p():
    return CellPermutation.from_cycles(GridGeometry.square(2), SAMPLE_P)


def random_cell_perm(g, seed):
    """A uniformly random measure-preserving map (usually not column-preserving)."""
    rng = np.random.default_rng(seed)
    if g.kind == "square":
        return CellPermutation(g, rng.permutation(g.ncells))
    image = np.arange(g.ncells)
    rows = np.arange(g.ncells) // g.columns
    for w in set(g.weights):
        idx = np.flatnonzero([g.weights[r] == w for r in rows])
        image[idx] = idx[rng.permutation(len(idx))]
    return CellPermutation(g, image)


class TestGroup:
    def test_sample_power(self):
        p = sample_p()
        assert power(p, 4)((0, 0)) == (0, 0)
        assert p((0, 0)) == (2, 2)
        assert p.cycle_lengths() == [1, 2, 2, 3, 4, 4]

    def test_identity_laws(self):
        p = sample_p()
        ident = CellPermutation.identity(p.geometry)
        assert compose(p, inverse(p)) == ident
        assert power(p, 0) == ident
        assert power(p, -3) == inverse(power(p, 3))

    def test_incompatible(self):
        a = CellPermutation.identity(GridGeometry.square(1))
        b = CellPermutation.identity(GridGeometry.uniform_discrete(1, 2))
        with pytest.raises(GeometryError):
            compose(a, b)

    @given(ranks, seeds, seeds, seeds)
    def test_associative(self, rank, s1, s2, s3):
        g = GridGeometry.square(rank)
        a, b = random_cell_perm(g, s1), random_cell_perm(g, s2)
        c = random_cell_perm(g.at_rank(max(rank - 1, 0)), s3)
        assert compose(compose(a, b), c) == compose(a, compose(b, c))
        assert compose(inverse(a), a).is_identity()

    @given(st.integers(0, 2), st.integers(0, 2), seeds)
    def test_refine_is_the_same_map(self, rank, extra, seed):
        g = GridGeometry.square(rank)
        p = random_cell_perm(g, seed)
        fine = p.refine(rank + extra)
        s = DyadicSet.square_cell(g, rank, 0, 0)
        assert fine.image_of(s.refine(rank + extra)) == p.image_of(s)
        assert fine.coarsest().rank <= rank
        assert fine == p

    def test_refine_down_is_an_error(self):
        with pytest.raises(RankError):
            sample_p().refine(1)

    def test_interval_permutation(self):
        p = IntervalPermutation.from_cycles(2, [[0, 2]])
        assert p.refine(3).coarsest() == p
        assert p.compose(p.inverse()).is_identity()
        assert p.cycle_lengths() == [1, 1, 2]


class TestBase:
    def test_sample_p_base(self):
        assert project_to_base(sample_p()) == IntervalPermutation.from_cycles(2, [[0, 2]])

    def test_identity_and_vertical_swap(self):
        g = GridGeometry.square(1)
        assert project_to_base(CellPermutation.identity(g)).is_identity()
        swap = CellPermutation.from_cycles(g, [[1, 3]])
        assert project_to_base(swap).is_identity()

    def test_witness(self):
        g = GridGeometry.square(1)
        t = CellPermutation.from_cycles(g, [[1, 2]])
        with pytest.raises(NotColumnPreserving) as info:
            project_to_base(t)
        a, b = info.value.witness
        assert a.column == b.column and t(a).column != t(b).column

    @given(ranks, seeds, seeds)
    def test_projection_is_a_homomorphism(self, rank, s1, s2):
        a = random_column_preserving(rank, s1)
        b = random_column_preserving(rank, s2)
        assert project_to_base(compose(a, b)) == project_to_base(a).compose(project_to_base(b))

    def test_fiber_action_examples(self):
        p = sample_p()
        assert fiber_action(p, 0, 0) == (0, 1, 2, 3)
        assert fiber_action(p, 1, 0) == oracle.fiber_action(oracle.perm_from_labels(2, SAMPLE_P), 1, 0, 4)
        swap = CellPermutation.from_cycles(GridGeometry.square(1), [[1, 3]])
        assert fiber_action(swap, 1, 0) == (1, 0)

    @given(st.integers(0, 2), seeds, st.integers(0, 6), st.integers(0, 6), st.data())
    def test_cocycle(self, rank, seed, m, n, data):
        g = GridGeometry.discrete(rank, [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)])
        t = random_column_preserving(rank, seed, g)
        x = data.draw(st.integers(0, g.columns - 1))
        y = project_to_base(t).power(n)(x)
        inner = fiber_action(t, n, x)
        outer = fiber_action(t, m, y)
        assert fiber_action(t, m + n, x) == tuple(outer[j] for j in inner)


class TestMetrics:
    def test_dprime_examples(self):
        g = GridGeometry.square(1)
        ident = CellPermutation.identity(g)
        swap = CellPermutation.from_cycles(g, [[1, 2]])
        assert metric_dprime(ident, ident) == 0
        assert metric_dprime(ident, swap) == DyadicRational(1, 1)

    def test_d_examples(self):
        g = GridGeometry.square(1)
        ident = CellPermutation.identity(g)
        swap = CellPermutation.from_cycles(g, [[1, 2]])
        assert metric_d_bruteforce(swap, swap) == 0
        assert metric_d_bruteforce(ident, swap) == DyadicRational(1, 1)

    def test_too_large(self):
        with pytest.raises(TooLarge):
            metric_d_bruteforce(sample_p().refine(3), sample_p())

    @given(ranks, seeds, seeds, seeds)
    def test_dprime_bi_invariance(self, rank, s1, s2, s3):
        g = GridGeometry.square(rank)
        r, s, t = (random_cell_perm(g, x) for x in (s1, s2, s3))
        d = metric_dprime(s, t)
        assert metric_dprime(compose(r, s), compose(r, t)) == d
        assert metric_dprime(compose(s, r), compose(t, r)) == d

    @given(st.integers(0, 1), seeds, seeds)
    def test_d_matches_oracle(self, rank, s1, s2):
        g = GridGeometry.square(rank)
        s, t = random_cell_perm(g, s1), random_cell_perm(g, s2)
        want = oracle.d_brute(
            oracle.perm_from_library(s), oracle.perm_from_library(t), oracle.square_measure(rank)
        )
        assert metric_d_bruteforce(s, t) == want
        lower, upper = metric_d_bounds(s, t)
        assert lower <= want <= upper == metric_dprime(s, t)

    @given(seeds, seeds)
    def test_d_on_discrete_grid(self, s1, s2):
        w = [Fraction(1, 2), Fraction(1, 6), Fraction(1, 6), Fraction(1, 6)]
        g = GridGeometry.discrete(1, w)
        s, t = random_cell_perm(g, s1), random_cell_perm(g, s2)
        d = metric_d_bruteforce(s, t)
        assert d == oracle.d_brute(
            oracle.perm_from_library(s), oracle.perm_from_library(t), oracle.discrete_measure(1, w)
        )
        lower, upper = metric_d_bounds(s, t)
        assert lower <= d <= upper


class TestNeighborhoods:
    def test_center_is_inside(self):
        p = sample_p()
        res = neighborhood_contains(square_neighborhood(p, 2, Fraction(1, 100)), p)
        assert res and all(d == 0 for d in res.deviations)

    def test_epsilon_one(self):
        p = sample_p()
        res = neighborhood_contains(square_neighborhood(p, 1, 1), random_cell_perm(p.geometry, 5))
        assert bool(res) == all(d < 1 for d in res.deviations)

    def test_vertical_swap_fixes_its_column(self):
        g = GridGeometry.square(1)
        ident = CellPermutation.identity(g)
        swap = CellPermutation.from_cycles(g, [[1, 3]])
        nb = Neighborhood(ident, (DyadicSet.cylinder(g, [0]),), Fraction(1, 1000))
        res = neighborhood_contains(nb, swap)
        assert res and res.deviations == (0,)

    def test_strict_inequality(self):
        g = GridGeometry.square(1)
        ident = CellPermutation.identity(g)
        swap = CellPermutation.from_cycles(g, [[1, 2]])
        cell = DyadicSet.square_cell(g, 1, 0, 0)
        assert not neighborhood_contains(Neighborhood(ident, (cell,), Fraction(1, 2)), swap)
        assert neighborhood_contains(Neighborhood(ident, (cell,), Fraction(3, 4)), swap)

    def test_dyadic_squares_partition(self):
        sq = dyadic_squares(2)
        assert len(sq) == 16
        assert sum((s.measure() for s in sq), DyadicRational(0)) == 1


class TestPerturbation:
    @given(ranks, seeds, st.integers(1, 8))
    def test_leaves_the_extensions(self, rank, seed, e):
        t = random_column_preserving(rank, seed)
        eps = Fraction(1, 2**e)
        s = perturb_off_extension(t, eps)
        with pytest.raises(NotColumnPreserving):
            project_to_base(s)
        assert metric_dprime(s, t) < eps
        assert compose(s, inverse(s)).is_identity()

    def test_rank_cap(self):
        t = random_column_preserving(1, 0)
        with pytest.raises(RankError):
            perturb_off_extension(t, Fraction(1, 2**40))


class TestRandom:
    def test_deterministic(self):
        assert random_column_preserving(3, 11) == random_column_preserving(3, 11)

    @given(ranks, seeds)
    def test_column_preserving(self, rank, seed):
        project_to_base(random_column_preserving(rank, seed))

    def test_discrete_rows_keep_weight(self):
        g = GridGeometry.discrete(2, [Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)])
        for seed in range(20):
            t = random_column_preserving(2, seed, g)
            for x in range(4):
                assert fiber_action(t, 1, x)[0] == 0

    def test_base_uniform_at_rank_one(self):
        # chi-square against the uniform law on the two base permutations
        counts = [0, 0]
        n = 10_000
        for seed in range(n):
            counts[project_to_base(random_column_preserving(1, seed)).is_identity()] += 1
        chi2 = sum((c - n / 2) ** 2 / (n / 2) for c in counts)
        assert chi2 < 10.83  # 0.1% critical value, one degree of freedom

    def test_cycle_type(self):
        g = GridGeometry.square(3)
        t = random_extension(g, 4, [4, 2, 1, 1])
        assert project_to_base(t).cycle_lengths() == [1, 1, 2, 4]
