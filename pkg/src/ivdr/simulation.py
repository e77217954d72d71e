"""Monte Carlo harness: data generator with an endogenous regressor and a
censored outcome, the implied structural CDF, and a study runner that scores
estimator/monotonization combinations by bias, variance and MSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .dataio import Dataset
from .driver import ThresholdGrid, fit_curve
from .errors import IvdrError
from .monotone import monotonize
from .numerics import std_normal_cdf
from .three_step import first_stage


@dataclass(frozen=True)
class DgpConfig:
    """Simulation design: correlation between errors, sample size, censoring."""

    rho: float
    n: int
    censor_at: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must lie strictly inside (-1, 1)")
        if self.n < 10:
            raise ValueError("sample size too small")


def draw_dgp(config: DgpConfig) -> Dataset:
    """Draw one sample.

    x, z iid standard normal; errors (u, v) standard bivariate normal with
    correlation rho; first stage y2 = 1 + x + z + v; latent outcome
    1 + x + y2 + u, censored from below at censor_at. Deterministic in
    config.seed.
    """
    rng = np.random.default_rng(config.seed)
    x = rng.standard_normal(config.n)
    z = rng.standard_normal(config.n)
    e1 = rng.standard_normal(config.n)
    e2 = rng.standard_normal(config.n)
    u = e1
    v = config.rho * e1 + np.sqrt(1.0 - config.rho ** 2) * e2
    y2 = 1.0 + x + z + v
    latent = 1.0 + x + y2 + u
    outcome = np.maximum(config.censor_at, latent)
    return Dataset(
        outcome=outcome,
        endogenous=y2,
        exogenous=np.column_stack([np.ones(config.n), x]),
        instruments=z[:, None],
    )


def true_cdf(y, x: float, y2: float):
    """Structural CDF of the censored-at-2 design: Phi(y - 1 - x - y2) for
    y >= 2, zero below the censoring point. x is the scalar covariate value."""
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 2.0, std_normal_cdf(y - 1.0 - x - y2), 0.0)
    return float(out) if out.ndim == 0 else out


def _structural_cdf(thresholds: np.ndarray, x: float, y2: float, censor_at: float) -> np.ndarray:
    return np.where(thresholds >= censor_at,
                    std_normal_cdf(thresholds - 1.0 - x - y2), 0.0)


@dataclass(frozen=True)
class McCell:
    """Grid-averaged accuracy of one estimator/monotonizer at one design point."""

    estimator: str
    monotonizer: str
    n: int
    x: float
    y2: float
    avg_bias_sq: float
    avg_variance: float
    avg_mse: float
    replications: int
    failures: int


@dataclass(frozen=True)
class McReport:
    """All study cells plus the settings needed to reproduce them."""

    cells: tuple[McCell, ...]
    grid: ThresholdGrid
    rho: float
    seed: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([vars(c) for c in self.cells])

    def cell(self, estimator: str, monotonizer: str, n: int, x: float, y2: float) -> McCell:
        for c in self.cells:
            if (c.estimator == estimator and c.monotonizer == monotonizer
                    and c.n == n and c.x == x and c.y2 == y2):
                return c
        raise KeyError((estimator, monotonizer, n, x, y2))


def run_study(sample_sizes, scenarios, *, replications: int, grid: ThresholdGrid | None = None,
              rho: float = 0.7, estimators=("probit", "three_step"),
              monotonizers=("rearrange", "isotonic"), quantile_levels=None,
              censor_at: float = 2.0, seed: int = 0) -> McReport:
    """Monte Carlo comparison of estimators over a threshold grid.

    scenarios are (x, y2) evaluation pairs (scalar covariate value and
    endogenous value). For each replicate one dataset is drawn and every
    estimator/monotonizer/scenario combination is evaluated on it, so
    comparisons share the simulation noise. Per grid point g the report
    accumulates squared bias (mean fit - truth)^2 and population variance
    across replicates; their sum equals the mean squared error identically.
    """
    if grid is None:
        grid = ThresholdGrid.linspace(1.0, 5.0, 50)
    if not isinstance(grid, ThresholdGrid):
        grid = ThresholdGrid(np.asarray(grid, dtype=float))
    scenarios = [(float(a), float(b)) for a, b in scenarios]
    estimators = list(estimators)
    monotonizers = list(monotonizers)
    for m in monotonizers:
        if m not in ("isotonic", "rearrange", "none"):
            raise ValueError(f"unknown monotonization method {m!r}")

    cells = []
    for n_index, n in enumerate(sample_sizes):
        # draws[estimator][(mono, scenario)] -> list of value arrays
        draws: dict = {_name(e): {} for e in estimators}
        failures = {_name(e): 0 for e in estimators}
        for r in range(replications):
            child = np.random.SeedSequence(entropy=seed, spawn_key=(n_index, r))
            data = draw_dgp(DgpConfig(rho=rho, n=int(n), censor_at=censor_at,
                                      seed=int(child.generate_state(1)[0])))
            fs = first_stage(data)
            for est in estimators:
                name = _name(est)
                try:
                    per_combo = {}
                    for x_val, y2_val in scenarios:
                        curve = fit_curve(data, est, grid, np.array([1.0, x_val]), y2_val,
                                          first_stage_fit=fs)
                        for mono in monotonizers:
                            corrected = monotonize(curve, mono, quantile_levels)
                            per_combo[(mono, (x_val, y2_val))] = corrected.values
                except (IvdrError, ValueError):
                    failures[name] += 1
                    continue
                for key, vals in per_combo.items():
                    draws[name].setdefault(key, []).append(vals)

        for est in estimators:
            name = _name(est)
            for mono in monotonizers:
                for x_val, y2_val in scenarios:
                    stack = np.asarray(draws[name].get((mono, (x_val, y2_val)), []))
                    if stack.size == 0:
                        raise IvdrError(
                            f"estimator {name!r} failed in every replicate at n={n}"
                        )
                    truth = _structural_cdf(grid.values, x_val, y2_val, censor_at)
                    mean_fit = stack.mean(axis=0)
                    bias_sq = (mean_fit - truth) ** 2
                    variance = ((stack - mean_fit) ** 2).mean(axis=0)
                    mse = ((stack - truth) ** 2).mean(axis=0)
                    cells.append(McCell(
                        estimator=name,
                        monotonizer=mono,
                        n=int(n),
                        x=x_val,
                        y2=y2_val,
                        avg_bias_sq=float(bias_sq.mean()),
                        avg_variance=float(variance.mean()),
                        avg_mse=float(mse.mean()),
                        replications=stack.shape[0],
                        failures=failures[name],
                    ))
    return McReport(cells=tuple(cells), grid=grid, rho=rho, seed=seed)


def _name(estimator) -> str:
    return estimator if isinstance(estimator, str) else getattr(estimator, "__name__", "custom")
