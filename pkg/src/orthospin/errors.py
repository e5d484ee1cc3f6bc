"""Exception and warning types shared across the package."""


class OrthospinError(Exception):
    """Base class for all package errors."""


class DomainError(OrthospinError, ValueError):
    """An argument lies outside the domain of a transform or functional."""


class NonConvergenceError(OrthospinError, RuntimeError):
    """A root finder or iteration failed to converge."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class NoTransitionError(OrthospinError):
    """A threshold search found the same predicate value at both ends."""


class DimensionError(OrthospinError, ValueError):
    """Array shapes or sizes are inconsistent or out of range."""


class CapExceededError(DimensionError):
    """Exhaustive enumeration requested above the supported size."""


class NonContractionWarning(RuntimeWarning):
    """The contraction bound for the fixed-point map does not hold."""
