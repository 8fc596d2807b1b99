"""Exact dyadic permutations of the unit square and their fibrewise statistics."""

from .approx import approximate_by_column_permutation, square_deviations, wate
from .dyadic import DyadicRational
from .errors import (
    ConstructionError,
    CoverageInfeasible,
    DyadextError,
    GeometryError,
    NotColumnPreserving,
    ParseError,
    PreconditionError,
    RankError,
    TooLarge,
)
from .grid import Cell, DyadicSet, GridGeometry, Partition, refine, symmetric_difference_measure
from .matching import column_partition_match, partition_match
from .mixing import (
    DeviationSequence,
    FiberVector,
    GridFunction,
    cauchy_schwarz_check,
    cesaro_sequence,
    conditional_expectation,
    fubini_identity,
    half_square,
    mixing_deviation,
    relative_norm,
    strong_mixing_statistic,
    weak_mixing_witness,
    witness_lower_bound,
)
from .perms import (
    CellPermutation,
    IntervalPermutation,
    Neighborhood,
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
    square_neighborhood,
)
from .towers import Tower, conjugacy, periodic_base, rokhlin_base, uate

__version__ = "0.1.0"
