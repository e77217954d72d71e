"""Bootstrap uncertainty for fitted distribution curves.

Individuals are resampled with replacement and the entire pipeline (first
stage, per-threshold fits, monotone correction) is re-run on each replicate,
so the bands reflect all estimation steps. Difference bands feed the same
resample to both recipes, preserving the dependence between the two
estimators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .dataio import Dataset
from .driver import ThresholdGrid, fit_curve
from .errors import IvdrError, ReplicateFailure
from .monotone import monotonize

Estimator = Union[str, Callable]


@dataclass(frozen=True)
class Recipe:
    """Everything needed to turn a dataset into curve values.

    ``monotonize`` is "isotonic", "rearrange", or "none" (no correction;
    bands then cover the raw curve). ``quantile_levels`` feeds the
    rearrangement when used.
    """

    estimator: Estimator
    monotonize: str
    x: np.ndarray
    y2: float
    grid: ThresholdGrid
    quantile_levels: np.ndarray | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        if not isinstance(self.grid, ThresholdGrid):
            object.__setattr__(self, "grid", ThresholdGrid(np.asarray(self.grid, dtype=float)))
        if self.monotonize not in ("isotonic", "rearrange", "none"):
            raise ValueError(f"unknown monotonization method {self.monotonize!r}")


@dataclass(frozen=True)
class BandResult:
    """Pointwise percentile band around a curve (or curve difference).

    rejected marks grid points where the band excludes zero; it is the
    Hausman-style pointwise test when the curve is a difference. failures
    counts bootstrap replicates that raised and were dropped.
    """

    grid: ThresholdGrid
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    replications: int
    failures: int
    rejected: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie strictly inside (0, 1)")
        if np.any(self.lower > self.upper):
            raise ValueError("lower band exceeds upper band")


def curve_values(data: Dataset, recipe: Recipe) -> np.ndarray:
    """Run the full pipeline for one recipe and return grid values."""
    curve = fit_curve(data, recipe.estimator, recipe.grid, recipe.x, recipe.y2)
    if recipe.monotonize == "none":
        return np.asarray(curve.values, dtype=float)
    corrected = monotonize(curve, recipe.monotonize, recipe.quantile_levels)
    return corrected.values


def _replicate_indices(seed: int, r: int, n: int) -> np.ndarray:
    # spawn-keyed streams: reproducible for (seed, r) regardless of order
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
    return rng.integers(0, n, size=n)


def _percentile_band(point: np.ndarray, draws: np.ndarray, level: float,
                     grid: ThresholdGrid, replications: int, failures: int) -> BandResult:
    alpha = 1.0 - level
    lower = np.quantile(draws, alpha / 2.0, axis=0)
    upper = np.quantile(draws, 1.0 - alpha / 2.0, axis=0)
    return BandResult(
        grid=grid,
        point=point,
        lower=lower,
        upper=upper,
        level=level,
        replications=replications,
        failures=failures,
        rejected=(lower > 0.0) | (upper < 0.0),
    )


def bootstrap_bands(data: Dataset, recipe: Recipe, *, replications: int = 200,
                    level: float = 0.90, seed: int = 0) -> BandResult:
    """Pointwise percentile band for one recipe.

    Errors inside a replicate drop that replicate (counted in ``failures``);
    if more than half of the replicates fail the band is refused.
    """
    if replications < 2:
        raise ValueError("need at least 2 replications")
    point = curve_values(data, recipe)
    draws = []
    failures = 0
    for r in range(replications):
        resample = data.take(_replicate_indices(seed, r, data.n))
        try:
            draws.append(curve_values(resample, recipe))
        except (IvdrError, ValueError):
            failures += 1
    if len(draws) < replications / 2.0:
        raise ReplicateFailure(
            f"{failures} of {replications} bootstrap replicates failed"
        )
    return _percentile_band(point, np.asarray(draws), level, recipe.grid,
                            replications, failures)


def difference_bands(data: Dataset, recipe_a: Recipe, recipe_b: Recipe, *,
                     replications: int = 200, level: float = 0.90,
                     seed: int = 0) -> BandResult:
    """Percentile band for the pointwise difference of two recipes.

    Both recipes must share the grid and the evaluation point; each replicate
    evaluates both on the same resample, so the band is for the paired
    difference. Grid points where the band excludes zero are flagged in
    ``rejected``.
    """
    if replications < 2:
        raise ValueError("need at least 2 replications")
    if not np.array_equal(recipe_a.grid.values, recipe_b.grid.values):
        raise ValueError("difference bands require a shared threshold grid")
    if not np.array_equal(recipe_a.x, recipe_b.x) or recipe_a.y2 != recipe_b.y2:
        raise ValueError("difference bands require a shared evaluation point")
    point = curve_values(data, recipe_a) - curve_values(data, recipe_b)
    draws = []
    failures = 0
    for r in range(replications):
        resample = data.take(_replicate_indices(seed, r, data.n))
        try:
            draws.append(curve_values(resample, recipe_a) - curve_values(resample, recipe_b))
        except (IvdrError, ValueError):
            failures += 1
    if len(draws) < replications / 2.0:
        raise ReplicateFailure(
            f"{failures} of {replications} bootstrap replicates failed"
        )
    return _percentile_band(point, np.asarray(draws), level, recipe_a.grid,
                            replications, failures)
