"""Conditional Gaussian log-likelihood of the mixture model, two equivalent ways.

Conditional on the mixing variables and the variance paths, the observation
law is y_t ~ N(X_t beta + w_t H_t^(1/2) theta1, w_t Theta2 A H_t A' Theta2).
The direct form evaluates this density; the transformed form maps each
observation through (sqrt(w_t) Theta2 A)^(-1), leaving independent residuals
with diagonal covariance H_t plus the log-Jacobian of the map. Both must agree
to floating-point accuracy; the per-series sampler targets are built on the
transformed decomposition.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .core import ThetaParams

__all__ = [
    "whitening_matrix",
    "conditional_loglik_direct",
    "conditional_loglik_transformed",
    "transformed_residuals",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def whitening_matrix(a: np.ndarray, theta: ThetaParams) -> np.ndarray:
    """M = A^(-1) Theta2^(-1); then (Theta2 A H A' Theta2)^(-1) = M' H^(-1) M."""
    n = a.shape[0]
    a_inv = solve_triangular(a, np.eye(n), lower=True)
    return a_inv / theta.theta2[None, :]


def conditional_loglik_direct(
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
) -> float:
    """Sum over t of log N(y_t; loc_t + w_t H_t^(1/2) theta1, w_t Theta2 A H_t A' Theta2).

    ``h`` holds the diagonal variance paths, shape (T, n); ``w`` the mixing
    variables, shape (T,).
    """
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    t_len, n = y.shape
    sqrt_h = np.sqrt(h)
    resid = y - locations - w[:, None] * sqrt_h * theta.theta1[None, :]
    m = whitening_matrix(a, theta)
    s = resid @ m.T
    quad = np.sum(s * s / h, axis=1) / w
    log_det = n * np.log(w) + 2.0 * np.sum(np.log(theta.theta2)) + np.sum(np.log(h), axis=1)
    return float(np.sum(-0.5 * (n * _LOG_2PI + log_det + quad)))


def transformed_residuals(
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    *,
    series: int | None = None,
) -> np.ndarray:
    """Residuals of the transformed equations, N(0, H_t) distributed, shape (T, n).

    With ``series`` j given, the residuals are computed through the series-j
    transformed response (subtracting the other series' volatility columns
    first, then series j's own); the result is identical for every j.
    """
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    sqrt_w = np.sqrt(w)
    m = whitening_matrix(a, theta)
    g = m * theta.theta1[None, :]  # A_t^(-1) B_t = sqrt(w_t) * g
    ytil = (y - locations) @ m.T / sqrt_w[:, None]
    sqrt_h = np.sqrt(h)
    if series is None:
        return ytil - sqrt_w[:, None] * (sqrt_h @ g.T)
    j = series
    others = sqrt_h @ g.T - np.outer(sqrt_h[:, j], g[:, j])
    response_j = ytil - sqrt_w[:, None] * others
    return response_j - sqrt_w[:, None] * np.outer(sqrt_h[:, j], g[:, j])


def conditional_loglik_transformed(
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    *,
    series: int | None = None,
) -> float:
    """Same likelihood through the per-series decomposition plus the Jacobian.

    The residuals are independent N(0, H_t); the Jacobian of the linear map is
    |det (sqrt(w_t) Theta2 A)|^(-1) per observation.
    """
    h = np.asarray(h, dtype=float)
    w = np.asarray(w, dtype=float)
    t_len, n = np.asarray(y).shape
    z = transformed_residuals(y, locations, theta, a, h, w, series=series)
    core = -0.5 * np.sum(np.log(h) + z * z / h)
    log_jac = -0.5 * n * float(np.sum(np.log(w))) - t_len * float(np.sum(np.log(theta.theta2)))
    return float(core - 0.5 * t_len * n * _LOG_2PI + log_jac)
