"""Maximum-likelihood estimator for a probit threshold equation with an
endogenous regressor.

The model joins a binary threshold equation and a linear first stage:

    1{outcome <= y}  driven by  X'beta1 + Y2*beta2 + U,   Var(U) = 1
    Y2 = X'gamma1 + Z'gamma2 + V,                         Var(V) = sigma2_sq

with (U, V) jointly normal and correlation rho. Conditioning on V gives the
single-observation log-likelihood

    I * log Phi(m) + (1 - I) * log Phi(-m)
      - log(2*pi)/2 - log(sigma2_sq)/2 - V^2 / (2*sigma2_sq)

where m = (X'beta1 + Y2*beta2 + (rho/sigma2)*V) / sqrt(1 - rho^2). The
analytic score below is validated against central finite differences in the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Dataset
from .errors import BoundarySolution, DegenerateOutcome, NonFinite
from .numerics import inverse_mills, maximize_smooth, std_normal_cdf, std_normal_log_cdf
from .three_step import first_stage, second_stage

_LOG_2PI = np.log(2.0 * np.pi)
_RHO_EDGE = 1.0 - 1e-6


@dataclass(frozen=True)
class ThetaFull:
    """Full parameter vector of the joint model.

    rho is the correlation between the threshold-equation and first-stage
    errors; the implied coefficient on the first-stage residual is
    rho/sqrt(sigma2_sq) and the conditional error sd is sqrt(1 - rho^2).
    """

    beta1: np.ndarray
    beta2: float
    gamma1: np.ndarray
    gamma2: np.ndarray
    rho: float
    sigma2_sq: float

    def __post_init__(self):
        object.__setattr__(self, "beta1", np.asarray(self.beta1, dtype=float).ravel())
        object.__setattr__(self, "gamma1", np.asarray(self.gamma1, dtype=float).ravel())
        object.__setattr__(self, "gamma2", np.asarray(self.gamma2, dtype=float).ravel())
        object.__setattr__(self, "beta2", float(self.beta2))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "sigma2_sq", float(self.sigma2_sq))
        if self.beta1.shape != self.gamma1.shape:
            raise ValueError("beta1 and gamma1 must have the same length")
        pieces = np.concatenate([self.beta1, [self.beta2], self.gamma1, self.gamma2,
                                 [self.rho, self.sigma2_sq]])
        if not np.all(np.isfinite(pieces)):
            raise ValueError("parameters must be finite")
        if not abs(self.rho) < 1.0:
            raise ValueError(f"|rho| must be < 1, got {self.rho}")
        if not self.sigma2_sq > 0.0:
            raise ValueError(f"sigma2_sq must be > 0, got {self.sigma2_sq}")

    @property
    def sigma_eps(self) -> float:
        return float(np.sqrt(1.0 - self.rho * self.rho))

    @property
    def resid_coef(self) -> float:
        return self.rho / float(np.sqrt(self.sigma2_sq))


@dataclass(frozen=True)
class IvProbitMlFit:
    """ML fit: parameters, log-likelihood, convergence diagnostics.

    score_at_opt is the score in the unconstrained working coordinates
    (rho via arctanh, sigma2_sq via log), the space the convergence test
    lives in.
    """

    theta: ThetaFull
    loglik: float
    converged: bool
    iterations: int
    score_at_opt: np.ndarray


def pack_theta(theta: ThetaFull) -> np.ndarray:
    return np.concatenate([theta.beta1, [theta.beta2], theta.gamma1, theta.gamma2,
                           [theta.rho, theta.sigma2_sq]])


def unpack_theta(vec: np.ndarray, k: int, l: int) -> ThetaFull:
    vec = np.asarray(vec, dtype=float).ravel()
    if vec.shape[0] != 2 * k + l + 3:
        raise ValueError(f"expected {2 * k + l + 3} parameters, got {vec.shape[0]}")
    return ThetaFull(
        beta1=vec[:k],
        beta2=vec[k],
        gamma1=vec[k + 1:2 * k + 1],
        gamma2=vec[2 * k + 1:2 * k + 1 + l],
        rho=vec[-2],
        sigma2_sq=vec[-1],
    )


def transforms_for(k: int, l: int) -> tuple[str, ...]:
    """Per-coordinate transforms keeping rho in (-1, 1) and sigma2_sq positive."""
    return ("identity",) * (2 * k + l + 1) + ("tanh", "exp")


def _loglik_raw(data: Dataset, indicator_sign: np.ndarray, beta1, beta2, gamma1,
                gamma2, rho, sigma2_sq):
    """Value and packed score; may return non-finite near the domain edge."""
    x = data.exogenous
    z = data.instruments
    y2 = data.endogenous
    n = data.n

    one_minus_rho_sq = 1.0 - rho * rho
    if one_minus_rho_sq <= 0.0 or sigma2_sq <= 0.0:
        return -np.inf, None
    se = np.sqrt(one_minus_rho_sq)
    sigma2 = np.sqrt(sigma2_sq)
    lam = rho / sigma2

    v = y2 - x @ gamma1 - z @ gamma2
    index = x @ beta1 + y2 * beta2 + lam * v
    m = index / se
    t = indicator_sign * m
    value = (float(np.sum(std_normal_log_cdf(t)))
             - 0.5 * n * _LOG_2PI
             - 0.5 * n * np.log(sigma2_sq)
             - float(v @ v) / (2.0 * sigma2_sq))

    a = indicator_sign * inverse_mills(t)  # dL/dm per observation
    resid_score = -lam / se * a + v / sigma2_sq
    grad = np.concatenate([
        x.T @ a / se,
        [float(y2 @ a) / se],
        x.T @ resid_score,
        z.T @ resid_score,
        [float(a @ (v / sigma2 / se + index * rho / se ** 3))],
        [float(a @ v) * (-lam / (2.0 * sigma2_sq * se))
         - 0.5 * n / sigma2_sq + float(v @ v) / (2.0 * sigma2_sq * sigma2_sq)],
    ])
    return value, grad


def ml_loglik(theta: ThetaFull, data: Dataset, y: float):
    """Joint log-likelihood and its score (packed like pack_theta) at theta."""
    sign = 2.0 * (data.outcome <= y) - 1.0
    value, grad = _loglik_raw(data, sign, theta.beta1, theta.beta2, theta.gamma1,
                              theta.gamma2, theta.rho, theta.sigma2_sq)
    if grad is None or not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFinite(
            "log-likelihood is not finite at these parameters "
            f"(rho={theta.rho}, sigma2_sq={theta.sigma2_sq})"
        )
    return value, grad


def default_start(data: Dataset, y: float) -> ThetaFull:
    """Start values mapped from the three-step estimator.

    The second-stage coefficients estimate beta/sigma_eps and the residual
    coefficient rho/(sigma2*sigma_eps); inverting that map gives consistent
    starting values for the likelihood.
    """
    fs = first_stage(data)
    tilde = second_stage(data, fs, y)
    sigma2_sq = float(fs.residuals @ fs.residuals) / data.n
    s = tilde.rho_tilde * np.sqrt(sigma2_sq)
    rho0 = s / np.sqrt(1.0 + s * s)
    scale = np.sqrt(1.0 - rho0 * rho0)
    return ThetaFull(
        beta1=tilde.beta1_tilde * scale,
        beta2=tilde.beta2_tilde * scale,
        gamma1=fs.gamma[:data.k],
        gamma2=fs.gamma[data.k:],
        rho=float(rho0),
        sigma2_sq=sigma2_sq,
    )


def ml_fit(data: Dataset, y: float, *, start: ThetaFull | None = None,
           grad_tol: float = 1e-8, max_iter: int = 500) -> IvProbitMlFit:
    """Maximize the joint likelihood at threshold y.

    Optimization runs in unconstrained coordinates (arctanh rho, log
    sigma2_sq). Raises BoundarySolution when the fitted correlation reaches
    |rho| > 1 - 1e-6, where the conditional sd collapses and the fit is not
    interpretable.
    """
    indicator = data.outcome <= y
    frac = indicator.mean()
    if frac == 0.0 or frac == 1.0:
        raise DegenerateOutcome(f"indicator 1{{outcome <= {y}}} is constant")
    sign = 2.0 * indicator - 1.0
    if start is None:
        start = default_start(data, y)
    k, l = data.k, data.l

    def objective(vec: np.ndarray):
        value, grad = _loglik_raw(data, sign, vec[:k], vec[k], vec[k + 1:2 * k + 1],
                                  vec[2 * k + 1:2 * k + 1 + l], vec[-2], vec[-1])
        if grad is None:
            return -np.inf, np.zeros(vec.shape[0])
        return value, grad

    result = maximize_smooth(objective, pack_theta(start), transforms_for(k, l),
                             grad_tol=grad_tol, max_iter=max_iter)
    vec = result.argmax
    rho_hat, s2_hat = float(vec[-2]), float(vec[-1])
    if abs(rho_hat) > _RHO_EDGE:
        raise BoundarySolution(
            f"fitted correlation {rho_hat} is at the boundary of (-1, 1)"
        )
    theta_hat = unpack_theta(vec, k, l)
    _, grad = _loglik_raw(data, sign, theta_hat.beta1, theta_hat.beta2,
                          theta_hat.gamma1, theta_hat.gamma2, rho_hat, s2_hat)
    score = grad.copy()
    score[-2] *= 1.0 - rho_hat * rho_hat  # d rho / d arctanh(rho)
    score[-1] *= s2_hat                   # d sigma2_sq / d log(sigma2_sq)
    converged = result.converged or float(np.linalg.norm(score)) < 1e-6
    return IvProbitMlFit(
        theta=theta_hat,
        loglik=result.value,
        converged=converged,
        iterations=result.iterations,
        score_at_opt=score,
    )


def ml_cdf_at(theta: ThetaFull, x: np.ndarray, y2: float) -> float:
    """Structural CDF implied by the ML parameters at design row x and value y2."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != theta.beta1.shape[0]:
        raise ValueError(f"x has length {x.shape[0]}, expected {theta.beta1.shape[0]}")
    return float(std_normal_cdf(x @ theta.beta1 + y2 * theta.beta2))
