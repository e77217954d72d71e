"""Numeric kernels: normal-distribution helpers, least squares, smooth maximization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import NonFiniteObjective, RankDeficient

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def std_normal_cdf(t):
    """Standard normal CDF, vectorized."""
    return ndtr(t)


def std_normal_pdf(t):
    """Standard normal density, vectorized."""
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * t * t - _LOG_SQRT_2PI)


def std_normal_log_cdf(t):
    """log Phi(t), accurate deep into the left tail."""
    return log_ndtr(t)


def std_normal_quantile(p):
    """Inverse of the standard normal CDF."""
    return ndtri(p)


def inverse_mills(t):
    """phi(t)/Phi(t), computed in log space so the left tail does not overflow 0/0.

    Far into the left tail the log-space exponent cancels two O(t^2) terms,
    which loses all precision once t*t outgrows the float mantissa; there the
    asymptotic expansion |t| + 1/|t| is exact to O(t^-3).
    """
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        dense = np.exp(-0.5 * t * t - _LOG_SQRT_2PI - log_ndtr(t))
        tail = -t - 1.0 / t
    return np.where(t <= -1e5, tail, dense)


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit: coefficients, residuals and residual sum of squares."""

    coef: np.ndarray
    residuals: np.ndarray
    rss: float


def ols(design: np.ndarray, response: np.ndarray, *, rtol: float = 1e-10) -> OlsFit:
    """Least squares via QR with an explicit rank check.

    Raises RankDeficient when any diagonal entry of R falls below ``rtol`` times
    the largest one, rather than returning a silently arbitrary solution.
    """
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float).ravel()
    if design.ndim != 2:
        raise ValueError("design must be a 2-D array")
    n, p = design.shape
    if response.shape[0] != n:
        raise ValueError("design and response have different numbers of rows")
    if n < p:
        raise RankDeficient(f"{n} rows cannot identify {p} coefficients")
    q, r = np.linalg.qr(design, mode="reduced")
    diag = np.abs(np.diag(r))
    if diag.min() <= rtol * diag.max():
        raise RankDeficient("design matrix is rank deficient within tolerance 1e-10")
    coef = solve_triangular(r, q.T @ response, lower=False)
    residuals = response - design @ coef
    return OlsFit(coef=coef, residuals=residuals, rss=float(residuals @ residuals))


# --- smooth maximization -----------------------------------------------------

_TRANSFORM_CODES = {"identity": 0, "tanh": 1, "exp": 2}


def _transform_codes(transforms, p: int) -> np.ndarray:
    if transforms is None:
        return np.zeros(p, dtype=int)
    names = list(transforms)
    if len(names) != p:
        raise ValueError(f"expected {p} transforms, got {len(names)}")
    try:
        return np.array([_TRANSFORM_CODES[name or "identity"] for name in names])
    except KeyError as exc:
        raise ValueError(f"unknown transform {exc.args[0]!r}") from None


def _to_constrained(eta: np.ndarray, codes: np.ndarray) -> np.ndarray:
    x = eta.copy()
    m = codes == 1
    if m.any():
        x[m] = np.tanh(eta[m])
    m = codes == 2
    if m.any():
        x[m] = np.exp(eta[m])
    return x


def _from_constrained(x: np.ndarray, codes: np.ndarray) -> np.ndarray:
    eta = np.array(x, dtype=float)
    m = codes == 1
    if m.any():
        if np.any(np.abs(x[m]) >= 1.0):
            raise ValueError("tanh-transformed start must lie strictly inside (-1, 1)")
        eta[m] = np.arctanh(x[m])
    m = codes == 2
    if m.any():
        if np.any(x[m] <= 0.0):
            raise ValueError("exp-transformed start must be strictly positive")
        eta[m] = np.log(x[m])
    return eta


def _jacobian(x: np.ndarray, codes: np.ndarray) -> np.ndarray:
    jac = np.ones_like(x)
    m = codes == 1
    if m.any():
        jac[m] = 1.0 - x[m] * x[m]
    m = codes == 2
    if m.any():
        jac[m] = x[m]
    return jac


@dataclass(frozen=True)
class MaximizeResult:
    """Outcome of maximize_smooth.

    ``argmax`` is in original (constrained) coordinates; ``grad_norm`` is the
    gradient norm in the unconstrained working coordinates, the quantity the
    convergence test uses.
    """

    argmax: np.ndarray
    value: float
    converged: bool
    iterations: int
    grad_norm: float


def maximize_smooth(objective, start, transforms=None, *, grad_tol: float = 1e-8,
                    max_iter: int = 500) -> MaximizeResult:
    """Maximize a smooth objective by BFGS with a backtracking line search.

    Parameters
    ----------
    objective : callable
        Maps a parameter vector to ``(value, gradient)`` in original coordinates.
    start : array_like
        Starting point, strictly inside the domain implied by ``transforms``.
    transforms : sequence of {"identity", "tanh", "exp"} or None
        Per-coordinate reparameterizations: "tanh" constrains a coordinate to
        (-1, 1), "exp" to (0, inf). Optimization runs in the unconstrained space.

    Non-finite trial values during the line search shrink the step; the search
    raises NonFiniteObjective only when no finite point is reachable (the
    exception carries the last valid iterate in original coordinates).
    """
    x0 = np.asarray(start, dtype=float).ravel()
    p = x0.size
    codes = _transform_codes(transforms, p)
    eta = _from_constrained(x0, codes)

    def evaluate(eta_try: np.ndarray):
        x = _to_constrained(eta_try, codes)
        if not np.all(np.isfinite(x)):
            return None
        value, grad = objective(x)
        value = float(value)
        grad = np.asarray(grad, dtype=float).ravel()
        f = -value
        g = -(grad * _jacobian(x, codes))
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            return None
        return f, g, x

    first = evaluate(eta)
    if first is None:
        raise NonFiniteObjective("objective is non-finite at the start", last_iterate=None)
    f, g, x_cur = first

    ident = np.eye(p)
    h_inv = ident.copy()
    iterations = 0
    converged = False
    scaled = False

    for _ in range(max_iter):
        grad_norm = float(np.linalg.norm(g))
        if grad_norm < grad_tol:
            converged = True
            break
        iterations += 1
        direction = -(h_inv @ g)
        dphi0 = float(direction @ g)
        if dphi0 >= 0.0:
            h_inv = ident.copy()
            direction = -g
            dphi0 = float(direction @ g)

        accepted = None
        alpha = 1.0
        prev = None
        saw_finite = False
        for _ in range(60):
            trial = evaluate(eta + alpha * direction)
            if trial is None:
                alpha *= 0.5
                prev = None
                if alpha < 1e-20:
                    break
                continue
            saw_finite = True
            f_try = trial[0]
            if f_try <= f + 1e-4 * alpha * dphi0:
                accepted = (alpha,) + trial
                break
            # minimize the 1-D model: quadratic on the first backtrack, cubic after
            if prev is None:
                denom = 2.0 * (f_try - f - dphi0 * alpha)
                alpha_new = -dphi0 * alpha * alpha / denom if denom > 0 else 0.5 * alpha
            else:
                alpha_new = _cubic_step(f, dphi0, prev, (alpha, f_try))
            if not np.isfinite(alpha_new):
                alpha_new = 0.5 * alpha
            prev = (alpha, f_try)
            alpha = float(np.clip(alpha_new, 0.1 * alpha, 0.5 * alpha))
            if alpha < 1e-20:
                break

        if accepted is None:
            if not saw_finite:
                raise NonFiniteObjective(
                    "objective is non-finite along the entire search direction",
                    last_iterate=x_cur,
                )
            break  # stalled at numerical resolution; report non-convergence

        alpha, f_new, g_new, x_new = accepted
        step = alpha * direction
        eta_new = eta + step
        yk = g_new - g
        sy = float(step @ yk)
        if sy > 1e-10 * np.linalg.norm(step) * np.linalg.norm(yk):
            if not scaled:
                h_inv = ident * (sy / float(yk @ yk))
                scaled = True
            rho = 1.0 / sy
            left = ident - rho * np.outer(step, yk)
            h_inv = left @ h_inv @ left.T + rho * np.outer(step, step)
        eta, f, g, x_cur = eta_new, f_new, g_new, x_new

    return MaximizeResult(
        argmax=x_cur,
        value=-f,
        converged=converged,
        iterations=iterations,
        grad_norm=float(np.linalg.norm(g)),
    )


def _cubic_step(f0: float, dphi0: float, lo: tuple, hi: tuple) -> float:
    """Minimizer of the cubic through (0, f0) with slope dphi0 and two trial points."""
    a0, fa0 = lo
    a1, fa1 = hi
    d1 = fa0 - f0 - dphi0 * a0
    d2 = fa1 - f0 - dphi0 * a1
    denom = a0 * a0 * a1 * a1 * (a1 - a0)
    if denom == 0.0:
        return 0.5 * a1
    ca = (a0 * a0 * d2 - a1 * a1 * d1) / denom
    cb = (-(a0 ** 3) * d2 + (a1 ** 3) * d1) / denom
    if ca == 0.0:
        return -dphi0 / (2.0 * cb) if cb != 0.0 else 0.5 * a1
    disc = cb * cb - 3.0 * ca * dphi0
    if disc < 0.0:
        return 0.5 * a1
    return (-cb + np.sqrt(disc)) / (3.0 * ca)
