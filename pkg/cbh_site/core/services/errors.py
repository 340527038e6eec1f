"""Exceptions raised by the steady-state services."""

from __future__ import annotations

from typing import Any, Optional


class SolverError(RuntimeError):
    """Base class for steady-state solve failures."""


class MultipleSteadyStatesError(SolverError):
    """The Liouvillian has a degenerate null space; no unique steady state exists."""


class ResidualError(SolverError):
    """A solve finished but its residual exceeds the configured tolerance."""

    def __init__(self, message: str, residual: float, result: Optional[Any] = None) -> None:
        super().__init__(message)
        self.residual = residual
        self.result = result


class ConvergenceError(SolverError):
    """Time propagation did not reach the residual tolerance within max_time."""

    def __init__(self, message: str, residual: float, result: Optional[Any] = None) -> None:
        super().__init__(message)
        self.residual = residual
        self.result = result


class TruncationError(SolverError):
    """Auto-truncation hit max_fock before the Fock tail converged."""

    def __init__(self, message: str, best: Optional[Any] = None, tail_population: float = float("nan")) -> None:
        super().__init__(message)
        self.best = best
        self.tail_population = tail_population


class SweepError(RuntimeError):
    """Every point of a sweep failed."""
