"""Exception hierarchy shared by all fracvar modules."""
from __future__ import annotations

__all__ = [
    "FracvarError",
    "DomainError",
    "EvaluationError",
    "ParseError",
    "GridError",
    "UnsupportedProblemError",
    "SolverError",
    "ConvergenceError",
]


class FracvarError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracvarError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class EvaluationError(FracvarError, ArithmeticError):
    """A numeric evaluation could not be completed (overflow, log of a
    non-positive number, series budget exceeded, ...)."""


class ParseError(FracvarError, ValueError):
    """Expression source text could not be parsed.

    ``offset`` is the byte offset into the UTF-8 encoded source at which
    the problem was detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


class GridError(FracvarError, ValueError):
    """A grid violates a structural requirement (non-uniform, too short,
    or mismatched against another grid)."""


class UnsupportedProblemError(FracvarError, ValueError):
    """The problem is well-formed but outside the scope of the requested
    method (for example an xp-dependent Lagrangian in the first-variation
    solver, or an unknown probe/family pair)."""


class SolverError(FracvarError, RuntimeError):
    """Base class for iterative-solver failures; carries diagnostics."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConvergenceError(SolverError):
    """An iterative solver failed to reach its tolerance (singular
    Jacobian, iteration budget exhausted, non-finite state, ...)."""
