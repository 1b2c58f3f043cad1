"""Exception and warning types shared across the package."""


class SlowdiffError(Exception):
    """Base class for all package errors."""


class ArgumentError(SlowdiffError, ValueError):
    """Invalid argument or violated precondition."""


class DomainError(ArgumentError):
    """A parameter lies outside the domain where a bound is valid."""

    def __init__(self, message, boundary=None):
        super().__init__(message)
        self.boundary = boundary


class ResourceError(SlowdiffError, RuntimeError):
    """The requested computation exceeds a configured resource budget."""


class StatisticalValidityWarning(UserWarning):
    """A Monte Carlo summary should not be trusted at face value."""


class ResolutionError(SlowdiffError, RuntimeError):
    """A discretization is too coarse or too small for the requested accuracy."""
