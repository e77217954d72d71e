"""Linear benchmark fits for the outcome equation: OLS and two-stage least
squares with homoskedastic standard errors, plus delta-method prediction
intervals for conditional expectations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Dataset
from .errors import RankDeficient
from .numerics import ols


@dataclass(frozen=True)
class LinearFit:
    """Coefficients with covariance for the outcome equation.

    Rows of the design are [exogenous block | endogenous], labeled
    accordingly. Standard errors are homoskedastic with denominator n - p;
    for 2SLS the residuals are evaluated at the original regressors.
    """

    labels: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    vcov: np.ndarray
    method: str

    def named(self) -> dict[str, tuple[float, float]]:
        return {lab: (float(c), float(s))
                for lab, c, s in zip(self.labels, self.coef, self.se)}


def _labels(data: Dataset, exog_labels) -> tuple[str, ...]:
    if exog_labels is None:
        exog_labels = ["const"] + [f"x{i}" for i in range(1, data.k)]
    if len(exog_labels) != data.k:
        raise ValueError(f"expected {data.k} exogenous labels, got {len(exog_labels)}")
    return tuple(exog_labels) + ("endogenous",)


def ols_outcome(data: Dataset, exog_labels=None) -> LinearFit:
    """OLS of the outcome on [exogenous, endogenous], ignoring endogeneity."""
    design = np.column_stack([data.exogenous, data.endogenous])
    fit = ols(design, data.outcome)
    n, p = design.shape
    sigma_sq = fit.rss / (n - p)
    xtx_inv = np.linalg.inv(design.T @ design)
    vcov = sigma_sq * xtx_inv
    return LinearFit(
        labels=_labels(data, exog_labels),
        coef=fit.coef,
        se=np.sqrt(np.diag(vcov)),
        vcov=vcov,
        method="ols",
    )


def tsls_outcome(data: Dataset, exog_labels=None) -> LinearFit:
    """Two-stage least squares using the instruments for the endogenous column.

    First pass fits the endogenous regressor on [exogenous, instruments];
    second pass regresses the outcome on [exogenous, fitted endogenous]. The
    error variance uses residuals at the original endogenous values.
    """
    first_design = np.column_stack([data.exogenous, data.instruments])
    fitted = first_design @ ols(first_design, data.endogenous).coef
    second_design = np.column_stack([data.exogenous, fitted])
    second = ols(second_design, data.outcome)
    original_design = np.column_stack([data.exogenous, data.endogenous])
    residuals = data.outcome - original_design @ second.coef
    n, p = second_design.shape
    sigma_sq = float(residuals @ residuals) / (n - p)
    try:
        vcov = sigma_sq * np.linalg.inv(second_design.T @ second_design)
    except np.linalg.LinAlgError:
        raise RankDeficient("projected design is singular; instruments too weak") from None
    return LinearFit(
        labels=_labels(data, exog_labels),
        coef=second.coef,
        se=np.sqrt(np.diag(vcov)),
        vcov=vcov,
        method="tsls",
    )


def predict_with_se(fit: LinearFit, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Linear predictions c'beta with delta-method standard errors sqrt(c'Vc).

    rows are full design rows in the fit's column order
    [exogenous..., endogenous].
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != fit.coef.shape[0]:
        raise ValueError(f"rows have {rows.shape[1]} columns, expected {fit.coef.shape[0]}")
    values = rows @ fit.coef
    ses = np.sqrt(np.einsum("ij,jk,ik->i", rows, fit.vcov, rows))
    return values, ses
