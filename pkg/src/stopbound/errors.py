"""Exception hierarchy shared by all stopbound modules."""

from __future__ import annotations


class StopboundError(Exception):
    """Base class for all stopbound errors."""


class ProbSumError(StopboundError):
    """Jump probabilities do not sum to one exactly."""


class SignError(StopboundError):
    """Jump law lacks a strictly negative or strictly positive atom."""


class DuplicateAtomError(StopboundError):
    """Two atoms share the same jump value."""


class InvalidAtomError(StopboundError):
    """An atom has a nonpositive probability or zero jump value."""


class OutOfRangeError(StopboundError):
    """Query time lies outside the domain of a boundary curve."""


class DomainError(StopboundError):
    """Gain function is undefined somewhere in the requested cone."""


class NoConvergenceError(StopboundError):
    """Horizon doubling exhausted its budget before meeting tolerance.

    Carries the best value computed so far and the last doubling gap.
    """

    def __init__(self, message: str, best_value: float, err_est: float, T_used: int):
        super().__init__(message)
        self.best_value = best_value
        self.err_est = err_est
        self.T_used = T_used


class BracketError(StopboundError):
    """Bisection bracket does not straddle the stopping boundary."""


class NoiseFloorError(StopboundError):
    """Requested slope-gap tolerance lies below the numerical noise floor."""


class BoundaryCoverageError(StopboundError):
    """Boundary curve does not cover the required time range."""


class CoverageError(BoundaryCoverageError):
    """Simulation horizon exceeds the boundary curve's coverage."""


class RangeError(StopboundError):
    """Slice extends beyond the window where convexity is guaranteed."""
