"""Three-step control-function estimator of the conditional distribution.

Step 1 regresses the endogenous regressor on exogenous covariates and
instruments and keeps the residuals. Step 2 runs, for a threshold y, a probit
of 1{outcome <= y} on the covariates, the endogenous regressor and the step-1
residual; the residual coefficient absorbs the endogeneity. Step 3 averages
the normal CDF over the empirical residual distribution to recover the
structural CDF at a chosen covariate point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Dataset
from .errors import DegenerateOutcome, RankDeficient
from .numerics import ols, std_normal_cdf
from .probit import probit_fit


@dataclass(frozen=True)
class FirstStage:
    """First-stage regression: coefficients on [X Z], residuals, instrument F."""

    gamma: np.ndarray
    residuals: np.ndarray
    fstat: float


@dataclass(frozen=True)
class ThetaTilde:
    """Second-stage probit coefficients, scaled by the conditional error sd.

    beta1_tilde/beta2_tilde estimate beta/sqrt(1-rho^2); rho_tilde is the
    coefficient on the first-stage residual, rho/(sigma2*sqrt(1-rho^2)).
    """

    beta1_tilde: np.ndarray
    beta2_tilde: float
    rho_tilde: float


def first_stage(data: Dataset) -> FirstStage:
    """Least squares of the endogenous regressor on exogenous columns and instruments.

    The F statistic is the homoskedastic Wald test that all instrument
    coefficients are zero, computed from the restricted/unrestricted residual
    sums of squares with (l, n - k - l) degrees of freedom.
    """
    full_design = np.column_stack([data.exogenous, data.instruments])
    unrestricted = ols(full_design, data.endogenous)
    restricted = ols(data.exogenous, data.endogenous)
    df_resid = data.n - data.k - data.l
    if df_resid <= 0:
        raise RankDeficient("no residual degrees of freedom in the first stage")
    fstat = ((restricted.rss - unrestricted.rss) / data.l) / (unrestricted.rss / df_resid)
    return FirstStage(
        gamma=unrestricted.coef,
        residuals=unrestricted.residuals,
        fstat=max(float(fstat), 0.0),
    )


def second_stage(data: Dataset, first: FirstStage, y: float) -> ThetaTilde:
    """Probit of 1{outcome <= y} on [X, Y2, first-stage residual]."""
    indicator = (data.outcome <= y).astype(float)
    if indicator.min() == indicator.max():
        raise DegenerateOutcome(f"indicator 1{{outcome <= {y}}} is constant")
    design = np.column_stack([data.exogenous, data.endogenous, first.residuals])
    _check_rank(design)
    fit = probit_fit(design, indicator)
    k = data.k
    return ThetaTilde(
        beta1_tilde=fit.coef[:k],
        beta2_tilde=float(fit.coef[k]),
        rho_tilde=float(fit.coef[k + 1]),
    )


def cdf_at(tilde: ThetaTilde, residuals: np.ndarray, x: np.ndarray, y2: float) -> float:
    """Structural CDF estimate: residual-averaged normal CDF at (x, y2).

    ``x`` is a full design row including the leading intercept 1.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != tilde.beta1_tilde.shape[0]:
        raise ValueError(
            f"x has length {x.shape[0]}, expected {tilde.beta1_tilde.shape[0]}"
        )
    index = x @ tilde.beta1_tilde + y2 * tilde.beta2_tilde
    return float(np.mean(std_normal_cdf(index + tilde.rho_tilde * np.asarray(residuals))))


def _check_rank(design: np.ndarray, rtol: float = 1e-10) -> None:
    r = np.linalg.qr(design, mode="r")
    diag = np.abs(np.diag(r))
    if diag.min() <= rtol * diag.max():
        raise RankDeficient(
            "second-stage design is rank deficient "
            "(is the first-stage residual collinear or identically zero?)"
        )
