"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class HardyEigenError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(HardyEigenError, ValueError):
    """Invalid construction argument (exponent, interval, grid level, ...)."""


class AllZero(HardyEigenError):
    """Every sample of a function lies below the nodal-count floor."""


class ResourceLimit(HardyEigenError):
    """A grid refinement would exceed the configured node budget."""


class GridMismatch(HardyEigenError):
    """Two sampled objects live on different grids."""


class AnchorOffGrid(HardyEigenError):
    """A zero anchor cannot be placed on the grid of the problem."""


class WeightSyntaxError(HardyEigenError, SyntaxError):
    """Malformed weight expression; ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text


class DomainError(HardyEigenError, ArithmeticError):
    """A weight expression left its real domain (log/sqrt of a negative, division by zero)."""


class NotPositive(HardyEigenError, ValueError):
    """A weight is not strictly positive on the interval."""


class ZeroImage(HardyEigenError):
    """T f vanished identically for a nonzero f."""


class NotConverged(HardyEigenError):
    """The fixed-point iteration did not meet its tolerance; ``trace`` holds the partial run."""

    def __init__(self, message: str, trace=None, triple=None):
        super().__init__(message)
        self.trace = trace
        self.triple = triple


class NodalCountMissed(HardyEigenError):
    """A search start converged to a spectral function with the wrong number of zeros."""

    def __init__(self, message: str, achieved: int | None = None):
        super().__init__(message)
        self.achieved = achieved


class Empty(HardyEigenError):
    """No search start produced a spectral triple in the requested nodal class."""


class InsufficientData(HardyEigenError):
    """Too few rows for an asymptotic report."""


class DegenerateBlock(HardyEigenError):
    """A nodal block carries no mass."""


class BracketFailed(HardyEigenError):
    """The shooting bracket could not be made to straddle the requested eigenvalue."""


class NotApplicable(HardyEigenError):
    """Operation is only defined for a restricted parameter regime."""
