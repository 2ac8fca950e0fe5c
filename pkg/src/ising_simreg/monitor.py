"""
Progress hooks for regularization paths and cross-validation.

Any object implementing some of the PathMonitor methods can be passed to the
fitters. Hooks are called synchronously from the fitting thread; an exception
raised by a hook is logged and swallowed, it never aborts a fit.

Current implementations:
- LoggingMonitor - logs path start, every lambda and every fold with timing
"""

import logging
import time
from collections.abc import Sequence
from typing import Any
from typing import Protocol

import numpy as np

logger = logging.getLogger("ising_simreg.monitor")


class PathMonitor(Protocol):
    def on_path_start(self, lambda_grid: np.ndarray, weights: Any) -> None:
        """
        Called once before the first lambda of a path is fitted.

        Args:
            lambda_grid (np.ndarray): Descending penalty levels
            weights (PenaltyWeights): Weights and force-excluded coefficients
        """

    def on_lambda(self, index: int, lam: float, result: Any) -> None:
        """
        Called after each point of the path has been fitted.

        Args:
            index (int): Position in the grid
            lam (float): Penalty level
            result (SolverResult): Fit at this penalty level
        """

    def on_fold(self, fold: int, status: str) -> None:
        """
        Called when a cross-validation fold finishes.

        Args:
            fold (int): Fold number
            status (str): "ok", or "skipped: <reason>" for flagged folds
        """


def notify(monitors: Sequence[Any], hook: str, *args: Any) -> None:
    for monitor in monitors:
        method = getattr(monitor, hook, None)
        if method is None:
            continue
        try:
            method(*args)
        except Exception as e:
            logger.warning(f"Monitor {type(monitor).__name__} {hook} failed: {e}")


class LoggingMonitor:
    """Logs path and fold progress through the standard logging module."""

    def __init__(self, level: int = logging.INFO):
        self.level = level
        self._start_time: float | None = None

    def on_path_start(self, lambda_grid: np.ndarray, weights: Any) -> None:
        self._start_time = time.monotonic()
        logger.log(
            self.level,
            f"Path start: {len(lambda_grid)} lambdas from {lambda_grid[0]:.4g} "
            f"to {lambda_grid[-1]:.4g} | excluded={list(weights.excluded)}",
        )

    def on_lambda(self, index: int, lam: float, result: Any) -> None:
        elapsed = (time.monotonic() - self._start_time) if self._start_time else None
        logger.log(
            self.level,
            f"Lambda {index}: {lam:.4g} | active={list(result.active_set)} "
            f"| converged={result.converged} | cycles={result.iterations}"
            + (f" | elapsed={elapsed:.3f}s" if elapsed is not None else ""),
        )

    def on_fold(self, fold: int, status: str) -> None:
        logger.log(self.level, f"Fold {fold}: {status}")
