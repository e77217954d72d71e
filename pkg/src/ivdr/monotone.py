"""Monotone corrections for fitted CDF curves.

Threshold-by-threshold estimation does not constrain the fitted curve across
thresholds, so the raw curve can locally decrease. Two corrections are
offered: isotonic projection (least-squares projection onto the monotone
cone, computed by pool-adjacent-violators) and rearrangement (the curve is
replaced by the distribution of its own generalized inverse evaluated on a
grid of probability levels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .driver import CdfCurve, ThresholdGrid

DEFAULT_LEVELS = np.linspace(0.01, 0.99, 99)

METHODS = ("isotonic", "rearrange", "none")


@dataclass(frozen=True)
class MonotoneCurve:
    """Nondecreasing CDF curve over a threshold grid.

    method records how monotonicity was obtained: "isotonic", "rearranged",
    or "none-needed" when the input already satisfied it.
    """

    grid: ThresholdGrid
    values: np.ndarray
    method: str

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise ValueError("monotone curve values must be finite")
        if np.any(np.diff(values) < 0.0):
            raise ValueError("monotone curve values must be nondecreasing")
        object.__setattr__(self, "values", values)


def pava(values, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto the nondecreasing cone.

    Pool-adjacent-violators: scan left to right, merging each new point into
    the previous block while the previous block mean exceeds the current one.
    O(n): every merge removes a block.
    """
    values = np.asarray(values, dtype=float).ravel()
    if weights is None:
        weights = np.ones_like(values)
    else:
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != values.shape:
            raise ValueError("weights must match values in length")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")

    # blocks as parallel stacks: total weight, weighted mean, member count
    block_w: list[float] = []
    block_mean: list[float] = []
    block_len: list[int] = []
    for v, w in zip(values, weights):
        cur_w, cur_mean, cur_len = float(w), float(v), 1
        while block_mean and block_mean[-1] > cur_mean:
            prev_w = block_w.pop()
            prev_mean = block_mean.pop()
            prev_len = block_len.pop()
            tot = prev_w + cur_w
            cur_mean = (prev_w * prev_mean + cur_w * cur_mean) / tot
            cur_w = tot
            cur_len += prev_len
        block_w.append(cur_w)
        block_mean.append(cur_mean)
        block_len.append(cur_len)
    return np.repeat(block_mean, block_len)


def merge_ties(grid_values, values) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse duplicate grid points by weighted averaging.

    Returns the unique grid, the averaged values, and multiplicity weights,
    ready for a weighted pava call.
    """
    grid_values = np.asarray(grid_values, dtype=float).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if grid_values.shape != values.shape:
        raise ValueError("grid and values must have the same length")
    order = np.argsort(grid_values, kind="stable")
    grid_sorted = grid_values[order]
    vals_sorted = values[order]
    unique, start = np.unique(grid_sorted, return_index=True)
    counts = np.diff(np.append(start, grid_sorted.size))
    sums = np.add.reduceat(vals_sorted, start)
    return unique, sums / counts, counts.astype(float)


def isotonic(curve: CdfCurve) -> MonotoneCurve:
    """Isotonic projection of a fitted curve (grid already strictly increasing)."""
    return MonotoneCurve(grid=curve.grid, values=pava(curve.values), method="isotonic")


def rearrange(curve: CdfCurve, quantile_levels=None) -> MonotoneCurve:
    """Monotone rearrangement of a fitted curve.

    For each probability level u, the generalized inverse
    Q(u) = inf{grid y : curve(y) >= u} is located on the grid (+inf when the
    curve never reaches u); the rearranged curve at y is the fraction of
    levels with Q(u) <= y. Values land on the level-grid resolution 1/L.
    """
    levels = DEFAULT_LEVELS if quantile_levels is None else np.asarray(quantile_levels, dtype=float).ravel()
    if levels.size == 0:
        raise ValueError("quantile levels are empty")
    if np.any(levels <= 0.0) or np.any(levels >= 1.0):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    if levels.size > 1 and np.any(np.diff(levels) <= 0.0):
        raise ValueError("quantile levels must be strictly increasing")
    values = np.asarray(curve.values, dtype=float)
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("rearrangement expects CDF values within [0, 1]")

    # first grid index where the curve reaches each level; size(grid) = never
    reaches = values[None, :] >= levels[:, None]
    inverse_idx = np.where(reaches.any(axis=1), reaches.argmax(axis=1), values.size)
    inverse_sorted = np.sort(inverse_idx)
    counts = np.searchsorted(inverse_sorted, np.arange(values.size), side="right")
    return MonotoneCurve(
        grid=curve.grid,
        values=counts / levels.size,
        method="rearranged",
    )


def clamp_unit(curve: MonotoneCurve) -> MonotoneCurve:
    """Clip values into [0, 1], preserving the correction method label."""
    return MonotoneCurve(
        grid=curve.grid,
        values=np.clip(curve.values, 0.0, 1.0),
        method=curve.method,
    )


def monotonize(curve: CdfCurve, method: str, quantile_levels=None) -> MonotoneCurve:
    """Apply the requested monotone correction and clamp into [0, 1].

    method "none" asserts the curve is already nondecreasing (returning it
    with method "none-needed") and raises otherwise.
    """
    if method == "isotonic":
        return clamp_unit(isotonic(curve))
    if method == "rearrange":
        return clamp_unit(rearrange(curve, quantile_levels))
    if method == "none":
        values = np.asarray(curve.values, dtype=float)
        if np.any(np.diff(values) < 0.0):
            raise ValueError(
                "curve is not monotone; choose method 'isotonic' or 'rearrange'"
            )
        return clamp_unit(MonotoneCurve(grid=curve.grid, values=values, method="none-needed"))
    raise ValueError(f"unknown monotonization method {method!r} (expected one of {METHODS})")
