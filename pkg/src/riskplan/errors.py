"""Exception types shared across the package."""


class RiskplanError(Exception):
    """Base class for all package errors."""


class OutOfBoundsError(RiskplanError):
    """A world point or cell index lies outside the grid extent."""


class NoSuchLayerError(RiskplanError):
    """A named grid layer does not exist."""


class UnknownTerrainError(RiskplanError):
    """A terrain-derived quantity was requested at an unknown cell."""


class EmptyMatrixError(RiskplanError):
    """A decision matrix with zero alternatives was ranked."""


class EmptyCandidateSetError(RiskplanError):
    """Path selection was invoked with no candidates."""


class NoFeasiblePathError(RiskplanError):
    """No goal could be reached through known traversable cells."""


class GenerationFailedError(RiskplanError):
    """World generation could not satisfy the connectivity requirement."""


class InvalidSpecError(RiskplanError):
    """An experiment specification failed validation."""
