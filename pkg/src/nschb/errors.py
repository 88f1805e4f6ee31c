"""Exception types raised by the solver stack."""


class NSCHBError(Exception):
    """Base class for all package errors."""


class DomainError(NSCHBError, ValueError):
    """An order parameter left the open interval (-1, 1)."""


class RangeError(NSCHBError, ValueError):
    """A temperature left the declared attainable range."""


class CompatibilityError(NSCHBError, ValueError):
    """Right-hand side violates a solvability condition (e.g. nonzero mean)."""


class GridMismatchError(NSCHBError, ValueError):
    """Two fields or states live on different grids."""


class NonConvergenceError(NSCHBError, RuntimeError):
    """An iterative solver did not reach its tolerance.

    ``residual`` carries the last residual norm for reporting.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class InvariantViolation(NSCHBError, RuntimeError):
    """A monitored discrete invariant failed during a run."""
