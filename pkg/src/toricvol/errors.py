"""Exception hierarchy shared by all modules."""


class ToricvolError(Exception):
    """Base class for library errors."""


class SupportError(ToricvolError, ValueError):
    """Invalid support, variance vector or system description."""


class DimensionLimitError(ToricvolError):
    """An exact oracle was asked to work beyond its dimension limit."""


class NumericalError(ToricvolError):
    """A numerical procedure failed (non-convergence, singular data)."""


class ConvergenceError(NumericalError):
    def __init__(self, message, estimates=None, residual=None):
        super().__init__(message)
        self.estimates = estimates
        self.residual = residual


class NotInteriorError(ToricvolError, ValueError):
    """A momentum target is on or outside the boundary of the polytope."""
