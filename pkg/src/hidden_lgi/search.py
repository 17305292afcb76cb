"""Grid search followed by coordinate refinement with step halving.

Used by the filter-activation and hidden-nonlocality searches. The objective
returns None at infeasible points (for example a vanishing filter success
probability); those points are skipped.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
import numpy.typing as npt

from hidden_lgi.errors import NoFeasiblePoint

logger = logging.getLogger(__name__)

Objective = Callable[[npt.NDArray[np.float64]], Optional[float]]

TIE_TOL = 1e-12
REFINE_ITERATIONS = 40
REFINE_TOL = 1e-6


@dataclass(frozen=True)
class Coordinate:
    name: str
    low: float
    high: float
    grid: tuple[float, ...]
    is_loss: bool = False

    @property
    def initial_step(self) -> float:
        if len(self.grid) > 1:
            return float(np.min(np.diff(sorted(self.grid))))
        return (self.high - self.low) / 8


def linspace_coordinate(name: str, low: float, high: float, resolution: int, is_loss: bool = False) -> Coordinate:
    return Coordinate(name, low, high, tuple(np.linspace(low, high, resolution)), is_loss)


def fixed_coordinate(name: str, low: float, high: float, values: Sequence[float] = (0.0,)) -> Coordinate:
    return Coordinate(name, low, high, tuple(float(v) for v in values))


@dataclass(frozen=True)
class SearchOutcome:
    params: npt.NDArray[np.float64]
    value: float
    evaluations: int


class _Tracker:
    """Keeps the best feasible point; ties go to the smaller total loss."""

    def __init__(self, objective: Objective, coordinates: Sequence[Coordinate]):
        self.objective = objective
        self.loss_mask = np.array([c.is_loss for c in coordinates])
        self.evaluations = 0
        self.best_params = None
        self.best_value = -np.inf

    def loss(self, params) -> float:
        return float(np.sum(params[self.loss_mask]))

    def better(self, value: float, params, than_value: float, than_params) -> bool:
        if value > than_value + TIE_TOL:
            return True
        return abs(value - than_value) <= TIE_TOL and self.loss(params) < self.loss(than_params)

    def evaluate(self, params) -> Optional[float]:
        self.evaluations += 1
        value = self.objective(params)
        if value is not None and (self.best_params is None
                                  or self.better(value, params, self.best_value, self.best_params)):
            self.best_params, self.best_value = params.copy(), value
        return value


def _refine(tracker: _Tracker, coordinates: Sequence[Coordinate], iterations: int, tol: float) -> None:
    x = tracker.best_params.copy()
    fx = tracker.best_value
    steps = np.array([c.initial_step for c in coordinates])
    for _ in range(iterations):
        if np.all(steps < tol):
            break
        for i, c in enumerate(coordinates):
            if steps[i] < tol:
                continue
            moved = False
            for direction in (1.0, -1.0):
                trial = x.copy()
                trial[i] = np.clip(x[i] + direction * steps[i], c.low, c.high)
                if trial[i] == x[i]:
                    continue
                value = tracker.evaluate(trial)
                if value is not None and tracker.better(value, trial, fx, x):
                    x, fx, moved = trial, value, True
                    break
            if not moved:
                steps[i] /= 2


def maximize(objective: Objective, coordinates: Sequence[Coordinate],
             seeds: Iterable[Sequence[float]] = (),
             iterations: int = REFINE_ITERATIONS, tol: float = REFINE_TOL) -> SearchOutcome:
    """Evaluate the coordinate grid (plus any seed points), then refine the argmax."""
    tracker = _Tracker(objective, coordinates)
    points = itertools.chain(itertools.product(*(c.grid for c in coordinates)), seeds)
    for point in points:
        tracker.evaluate(np.array(point, dtype=np.float64))
    if tracker.best_params is None:
        raise NoFeasiblePoint(f"all {tracker.evaluations} grid points are infeasible")
    grid_value = tracker.best_value

    _refine(tracker, coordinates, iterations, tol)
    logger.debug("grid best %.12g refined to %.12g after %d evaluations",
                 grid_value, tracker.best_value, tracker.evaluations)
    return SearchOutcome(tracker.best_params, float(tracker.best_value), tracker.evaluations)
