"""Curve driver: fit the conditional CDF threshold by threshold over a grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Dataset
from .errors import AllPointsFailed, IvdrError, LevelOutOfRange
from .ivprobit import ml_cdf_at, ml_fit
from .probit import probit_fit
from .three_step import FirstStage, cdf_at, first_stage, second_stage
from .numerics import std_normal_cdf

FLAG_OK = "ok"
FLAG_DEGENERATE_LOW = "degenerate-low"
FLAG_DEGENERATE_HIGH = "degenerate-high"
FLAG_FAILED = "failed"

ESTIMATORS = ("probit", "three_step", "iv_ml")


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing, finite grid of outcome thresholds."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("threshold grid is empty")
        if not np.all(np.isfinite(values)):
            raise ValueError("threshold grid contains non-finite values")
        if values.size > 1 and not np.all(np.diff(values) > 0.0):
            raise ValueError("threshold grid must be strictly increasing")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_observed(cls, outcome) -> "ThresholdGrid":
        """Sorted unique observed outcomes."""
        return cls(np.unique(np.asarray(outcome, dtype=float)))

    @classmethod
    def linspace(cls, lo: float, hi: float, m: int) -> "ThresholdGrid":
        if m < 1:
            raise ValueError("grid needs at least one point")
        return cls(np.linspace(lo, hi, m))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class CdfCurve:
    """Raw fitted CDF values over a grid, with a per-point status flag."""

    grid: ThresholdGrid
    values: np.ndarray
    flags: tuple[str, ...]
    estimator: str


@dataclass(frozen=True)
class QuantileCurve:
    """Quantiles read off a monotone CDF curve; +inf marks unreachable levels."""

    levels: np.ndarray
    values: np.ndarray
    flags: tuple[str, ...]


def fit_curve(data: Dataset, estimator, grid: ThresholdGrid, x, y2: float, *,
              first_stage_fit: FirstStage | None = None) -> CdfCurve:
    """Estimate F(y | x, y2) at every grid threshold.

    estimator is "probit" (ignores endogeneity), "three_step", "iv_ml", or a
    callable ``(data, thresholds, x, y2) -> values`` for the live thresholds.
    ``x`` is a full design row including the leading intercept 1.

    Grid points where the indicator is constant are not fit: they get value
    0/1 with a degenerate flag. Points where the estimator fails keep a
    "failed" flag and are filled by linear interpolation between neighboring
    successful values.
    """
    if not isinstance(grid, ThresholdGrid):
        grid = ThresholdGrid(np.asarray(grid, dtype=float))
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != data.k:
        raise ValueError(f"x has length {x.shape[0]}, expected k = {data.k}")
    if not np.all(np.isfinite(x)) or not np.isfinite(y2):
        raise ValueError("evaluation point contains non-finite values")
    if x[0] != 1.0:
        raise ValueError("x must start with the intercept value 1")

    thresholds = grid.values
    counts = (data.outcome[:, None] <= thresholds[None, :]).sum(axis=0)
    flags = np.full(len(grid), FLAG_OK, dtype=object)
    values = np.full(len(grid), np.nan)
    flags[counts == 0] = FLAG_DEGENERATE_LOW
    values[counts == 0] = 0.0
    flags[counts == data.n] = FLAG_DEGENERATE_HIGH
    values[counts == data.n] = 1.0
    live = np.flatnonzero(flags == FLAG_OK)
    name = estimator if isinstance(estimator, str) else getattr(estimator, "__name__", "custom")

    if live.size:
        if callable(estimator):
            fitted = np.asarray(estimator(data, thresholds[live], x, y2), dtype=float).ravel()
            if fitted.shape[0] != live.size:
                raise ValueError(
                    f"estimator returned {fitted.shape[0]} values for {live.size} thresholds"
                )
            values[live] = fitted
        elif estimator == "probit":
            design = np.column_stack([data.exogenous, data.endogenous])
            row = np.append(x, y2)
            for j in live:
                values[j], flags[j] = _attempt(
                    lambda yj=thresholds[j]: _probit_point(data, design, row, yj)
                )
        elif estimator == "three_step":
            fs = first_stage_fit if first_stage_fit is not None else first_stage(data)
            for j in live:
                values[j], flags[j] = _attempt(
                    lambda yj=thresholds[j]: cdf_at(second_stage(data, fs, yj),
                                                    fs.residuals, x, y2)
                )
        elif estimator == "iv_ml":
            theta_prev = None
            for j in live:
                try:
                    fit = ml_fit(data, thresholds[j], start=theta_prev)
                    if not fit.converged:
                        raise IvdrError("likelihood maximization did not converge")
                except IvdrError:
                    values[j], flags[j] = np.nan, FLAG_FAILED
                else:
                    theta_prev = fit.theta
                    values[j] = ml_cdf_at(fit.theta, x, y2)
        else:
            raise ValueError(f"unknown estimator {estimator!r} (expected one of {ESTIMATORS})")

    failed = np.flatnonzero(flags == FLAG_FAILED)
    if failed.size == live.size and live.size > 0:
        raise AllPointsFailed(f"estimator {name!r} failed at every live grid point")
    if failed.size:
        good = np.flatnonzero(flags != FLAG_FAILED)
        values[failed] = np.interp(thresholds[failed], thresholds[good], values[good])
    return CdfCurve(grid=grid, values=values, flags=tuple(flags), estimator=name)


def _probit_point(data: Dataset, design: np.ndarray, row: np.ndarray, y: float) -> float:
    fit = probit_fit(design, (data.outcome <= y).astype(float))
    if not fit.converged:
        raise IvdrError("probit did not converge")
    return float(std_normal_cdf(row @ fit.coef))


def _attempt(thunk):
    try:
        return thunk(), FLAG_OK
    except IvdrError:
        return np.nan, FLAG_FAILED


def quantiles_from_curve(curve, levels, *, interpolate: bool = True) -> QuantileCurve:
    """Generalized inverse of a monotone CDF curve at the given levels.

    For a level u the quantile is the smallest grid point whose value reaches
    u; with ``interpolate`` (the default) the exact crossing is interpolated
    linearly between the bracketing grid points. Levels above the largest
    curve value get +inf with flag "above-range"; levels below the smallest
    value get the first grid point with flag "below-range".
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    if levels.size == 0:
        raise LevelOutOfRange("no quantile levels given")
    if np.any(~np.isfinite(levels)) or np.any(levels <= 0.0) or np.any(levels >= 1.0):
        raise LevelOutOfRange("quantile levels must lie strictly inside (0, 1)")
    grid = np.asarray(getattr(curve.grid, "values", curve.grid), dtype=float)
    values = np.asarray(curve.values, dtype=float)
    if np.any(np.diff(values) < 0.0):
        raise ValueError("curve is not monotone; apply a monotone correction first")

    out = np.empty(levels.shape)
    flags = []
    for i, u in enumerate(levels):
        j = int(np.searchsorted(values, u, side="left"))
        if j >= values.size:
            out[i] = np.inf
            flags.append("above-range")
        elif j == 0:
            out[i] = grid[0]
            flags.append("below-range" if u < values[0] else FLAG_OK)
        else:
            if interpolate:
                span = values[j] - values[j - 1]
                out[i] = grid[j - 1] + (u - values[j - 1]) / span * (grid[j] - grid[j - 1])
            else:
                out[i] = grid[j]
            flags.append(FLAG_OK)
    return QuantileCurve(levels=levels, values=out, flags=tuple(flags))
