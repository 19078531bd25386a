"""Exception hierarchy."""


class GVDPGMError(Exception):
    """Base class for all errors raised by this package."""


class SpaceMismatchError(GVDPGMError, ValueError):
    """Two points (or a point and an objective) live in different spaces."""


class DomainError(GVDPGMError, ValueError):
    """A point lies outside the open set on which an operation is defined."""


class ConfigError(GVDPGMError, ValueError):
    """Invalid solver, distance or experiment configuration."""


class NumericError(GVDPGMError, ArithmeticError):
    """An inner numerical procedure failed to reach its tolerance."""


class LoadError(GVDPGMError, ValueError):
    """A data file could not be parsed."""


class BacktrackingError(GVDPGMError, RuntimeError):
    """The Armijo search exhausted ``max_inner_iters``.

    Carries the last trial point and the partial trace so callers can
    inspect what happened before the failure.
    """

    def __init__(self, message, candidate=None, trace=None):
        super().__init__(message)
        self.candidate = candidate
        self.trace = trace
