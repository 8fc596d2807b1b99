"""Process-wide limits.

The rank cap protects against silently allocating huge grids: a square grid of
rank ``k`` has ``4**k`` cells, so the default cap of 12 allows at most about
16.7 million cells.
"""

from contextlib import contextmanager
from dataclasses import dataclass

from .errors import RankError


@dataclass
class Settings:
    rank_cap: int = 12
    # exhaustive sup-metric enumeration visits 2**cells subsets
    bruteforce_cells: int = 20
    # witness lower bound enumerates L! level permutations
    factorial_levels: int = 8


settings = Settings()


@contextmanager
def rank_cap(cap):
    """Temporarily change the rank cap."""
    old = settings.rank_cap
    settings.rank_cap = int(cap)
    try:
        yield settings
    finally:
        settings.rank_cap = old


def check_rank(rank, what="rank"):
    if rank < 0:
        raise RankError(f"{what} must be non-negative, got {rank}")
    if rank > settings.rank_cap:
        raise RankError(
            f"{what} {rank} exceeds the rank cap {settings.rank_cap}"
        )
    return rank
