"""Exception types raised across the toolkit."""


class TrimerError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgument(TrimerError, ValueError):
    """An argument violates an operation's precondition."""


class NumericalFailure(TrimerError, ArithmeticError):
    """A numerical routine failed to meet its accuracy contract.

    ``residual`` carries the offending measure when one is available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EmptyShellError(TrimerError, ValueError):
    """An energy window or sampling request selected nothing."""


class CacheError(TrimerError, IOError):
    """A spectrum cache file is corrupt, stale, or does not match the request."""


class GradientSingularity(TrimerError, ArithmeticError):
    """Equations of motion evaluated on a coordinate singularity of the simplex."""
