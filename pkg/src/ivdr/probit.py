"""Probit fitting by damped Newton with analytic score and Hessian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateOutcome, RankDeficient, SeparationSuspected
from .numerics import inverse_mills, std_normal_log_cdf, std_normal_quantile

_SEPARATION_NORM = 1e3


@dataclass(frozen=True)
class ProbitFit:
    """Fitted probit: coefficients, log-likelihood, covariance and diagnostics."""

    coef: np.ndarray
    loglik: float
    vcov: np.ndarray
    converged: bool
    iterations: int


def probit_loglik(coef, design, indicator):
    """Log-likelihood and score of the probit model at ``coef``.

    The indicator is coded 0/1; both pieces use the signed index s*eta with
    s = 2*indicator - 1, so only one log-CDF evaluation per observation is needed.
    """
    design = np.asarray(design, dtype=float)
    coef = np.asarray(coef, dtype=float)
    sign = 2.0 * np.asarray(indicator, dtype=float) - 1.0
    t = sign * (design @ coef)
    value = float(np.sum(std_normal_log_cdf(t)))
    grad = design.T @ (sign * inverse_mills(t))
    return value, grad


def probit_fit(design, indicator, *, grad_tol: float = 1e-8,
               max_iter: int = 60) -> ProbitFit:
    """Fit a probit by Newton iterations with step halving.

    The design must have full column rank and the indicator must take both
    values. Coefficient norms above 1e3 during iteration raise
    SeparationSuspected rather than returning a runaway fit.
    """
    design = np.asarray(design, dtype=float)
    indicator = np.asarray(indicator, dtype=float).ravel()
    n, p = design.shape
    if indicator.shape[0] != n:
        raise ValueError("design and indicator have different numbers of rows")
    if not np.all((indicator == 0.0) | (indicator == 1.0)):
        raise ValueError("indicator must be coded 0/1")
    mean = indicator.mean()
    if mean == 0.0 or mean == 1.0:
        raise DegenerateOutcome("indicator is constant; probit is not identified")

    sign = 2.0 * indicator - 1.0
    coef = np.zeros(p)
    if np.all(design[:, 0] == 1.0):
        coef[0] = std_normal_quantile(mean)

    loglik = float(np.sum(std_normal_log_cdf(sign * (design @ coef))))
    converged = False
    iterations = 0
    weights = None
    for _ in range(max_iter):
        t = sign * (design @ coef)
        mills = inverse_mills(t)
        score = design.T @ (sign * mills)
        if np.linalg.norm(score) < grad_tol:
            converged = True
            break
        iterations += 1
        weights = mills * (t + mills)
        hessian = (design * weights[:, None]).T @ design
        try:
            step = np.linalg.solve(hessian, score)
        except np.linalg.LinAlgError:
            _raise_for_singular(design, p)
        alpha = 1.0
        for _ in range(30):
            candidate = coef + alpha * step
            cand_ll = float(np.sum(std_normal_log_cdf(sign * (design @ candidate))))
            if cand_ll >= loglik - 1e-13:
                break
            alpha *= 0.5
        coef, loglik = candidate, cand_ll
        if np.linalg.norm(coef) > _SEPARATION_NORM:
            raise SeparationSuspected(
                "coefficient norm exceeded 1e3; outcomes look perfectly separated"
            )

    t = sign * (design @ coef)
    mills = inverse_mills(t)
    weights = mills * (t + mills)
    hessian = (design * weights[:, None]).T @ design
    try:
        vcov = np.linalg.inv(hessian)
    except np.linalg.LinAlgError:
        _raise_for_singular(design, p)
    return ProbitFit(coef=coef, loglik=loglik, vcov=vcov,
                     converged=converged, iterations=iterations)


def _raise_for_singular(design: np.ndarray, p: int):
    if np.linalg.matrix_rank(design) < p:
        raise RankDeficient("probit design matrix is rank deficient")
    raise SeparationSuspected(
        "information matrix is singular; outcomes look perfectly separated"
    )
