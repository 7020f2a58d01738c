"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class GibbsTreeError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(GibbsTreeError, ValueError):
    """Bad user configuration (unknown preset, too few nodes, malformed expression)."""


class ContractViolation(GibbsTreeError, ValueError):
    """Arguments violate a documented precondition of a pure function."""


class InvalidKernelError(GibbsTreeError, ValueError):
    """Kernel is non-finite or non-positive somewhere it is evaluated."""


class PreconditionError(GibbsTreeError):
    """A mathematical hypothesis of a construction does not hold."""


class NumericError(GibbsTreeError, ArithmeticError):
    """Overflow, underflow or NaN that rescaling could not prevent."""


class ResourceError(GibbsTreeError):
    """Requested tree volume exceeds the enumeration cap."""


class NoConvergenceError(GibbsTreeError):
    """An iterative method stopped without meeting its tolerance.

    ``best`` holds the best iterate found and ``residual`` its residual.
    """

    def __init__(self, message: str, *, best=None, residual: float = float("nan"), **extra):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.extra = extra


class DivergenceError(NoConvergenceError):
    """Residual grew past the admissible band during a fixed-point iteration."""
