"""Exception hierarchy shared by every module."""


class DyadextError(Exception):
    """Base class for all errors raised by this package."""


class RankError(DyadextError):
    """A rank is out of range: below the current rank, or above the cap."""


class GeometryError(DyadextError):
    """Two objects live on incompatible grids."""


class PreconditionError(DyadextError):
    """An operation's input does not satisfy its stated hypothesis."""


class TooLarge(DyadextError):
    """An exhaustive computation was asked for more than its bound allows."""


class ParseError(DyadextError):
    """A serialized object could not be read."""


class NotColumnPreserving(PreconditionError):
    """A cell permutation does not act on columns as a permutation.

    ``witness`` holds two cells of the same column whose images land in
    different columns (or ``None`` when the base map fails to be a bijection).
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CoverageInfeasible(PreconditionError):
    """No cylinder tower of the requested height covers enough of the square.

    ``best`` is the exact largest coverage attainable.
    """

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


class ConstructionError(DyadextError):
    """An internal identity of a construction failed to hold.

    This signals a bug rather than bad input.
    """
