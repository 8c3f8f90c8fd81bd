"""Stochastic-volatility regime: joint path sampling of the log variances.

Each series' whole log-variance path is proposed at once by an adaptive
random-walk MH step on the transformed likelihood (independent Gaussian
residuals with diagonal covariance H_t), tuned to an asymptotic acceptance
rate of 0.27. Persistence uses a log-odds random walk; the innovation
variance is conjugate inverse-gamma.
"""

from __future__ import annotations

import numpy as np

from .adapt import AdaptiveScale, rwmh_step
from .core import ThetaParams
from .likelihood import transformed_residuals, whitening_matrix

__all__ = [
    "sv_transformed_response",
    "ar1_log_prior",
    "h_path_log_target",
    "sample_h_path",
    "sample_phi",
    "sample_sigma2_h",
]


def sv_transformed_response(
    *,
    ybar: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    j: int,
    t: int | None = None,
) -> np.ndarray:
    """Series-j transformed responses: A_t^(-1) ybar_t minus the other series'
    volatility columns, leaving mean Atilde_{t,:j} e^(h_jt / 2).

    ``ybar`` must already have X_t beta removed. Returns the (T, n) stack, or
    the single row at ``t``.
    """
    sqrt_w = np.sqrt(np.asarray(w, dtype=float))
    m = whitening_matrix(a, theta)
    g = m * theta.theta1[None, :]
    ytil = np.asarray(ybar, dtype=float) @ m.T / sqrt_w[:, None]
    sqrt_h = np.exp(0.5 * np.asarray(h, dtype=float))
    others = sqrt_h @ g.T - np.outer(sqrt_h[:, j], g[:, j])
    out = ytil - sqrt_w[:, None] * others
    return out if t is None else out[t]


def ar1_log_prior(path: np.ndarray, phi: float, sigma2: float) -> float:
    """Log-density of a stationary AR(1) path including the initial term."""
    t_len = path.shape[0]
    sq = (1.0 - phi * phi) * path[0] ** 2 + float(np.sum((path[1:] - phi * path[:-1]) ** 2))
    return -0.5 * sq / sigma2 - 0.5 * t_len * np.log(2.0 * np.pi * sigma2) + 0.5 * np.log1p(-phi * phi)


def h_path_log_target(
    path: np.ndarray,
    *,
    j: int,
    ybar: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    phi_j: float,
    sigma2_h_j: float,
) -> float:
    """Full-conditional log-density of the series-j log-variance path.

    Transformed Gaussian likelihood of all residual components (the series-j
    volatility enters every component's mean and its own variance) plus the
    AR(1) prior.
    """
    h_trial = np.array(h, dtype=float, copy=True)
    h_trial[:, j] = path
    var = np.exp(h_trial)
    z = transformed_residuals(ybar, np.zeros_like(ybar), theta, a, var, w)
    loglik = -0.5 * float(np.sum(h_trial + z * z / var))
    return loglik + ar1_log_prior(path, phi_j, sigma2_h_j)


def sample_h_path(
    *,
    j: int,
    ybar: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    phi: np.ndarray,
    sigma2_h: np.ndarray,
    proposal_var: np.ndarray,
    scale: AdaptiveScale,
    rng: np.random.Generator,
    current_log_target: float | None = None,
) -> tuple[np.ndarray, bool, float]:
    """Whole-path RWMH update of h_j with diagonal proposal covariance kappa * S_j."""
    def log_target(path: np.ndarray) -> float:
        return h_path_log_target(
            path, j=j, ybar=ybar, theta=theta, a=a, h=h, w=w,
            phi_j=float(phi[j]), sigma2_h_j=float(sigma2_h[j]),
        )

    return rwmh_step(
        h[:, j].copy(), log_target, scale, rng,
        proposal_cov=proposal_var, current_log_target=current_log_target,
    )


def sample_phi(
    *,
    phi_j: float,
    h_j: np.ndarray,
    sigma2_h_j: float,
    prior_a: float,
    prior_b: float,
    scale: AdaptiveScale,
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """MH update of the persistence through a random walk on its log-odds.

    Prior: (1 + phi)/2 ~ Beta(prior_a, prior_b); likelihood: stationary AR(1)
    of the current path. The Jacobian of phi = tanh(z/2) is folded into the
    z-space target, keeping |phi| < 1 by construction.
    """
    def log_target_z(z_vec: np.ndarray) -> float:
        phi = float(np.tanh(0.5 * z_vec[0]))
        if abs(phi) >= 1.0:
            return -np.inf
        log_prior = (prior_a - 1.0) * np.log1p(phi) + (prior_b - 1.0) * np.log1p(-phi)
        log_jac = np.log1p(-phi * phi)
        return log_prior + ar1_log_prior(h_j, phi, sigma2_h_j) + log_jac

    z0 = np.array([np.log1p(phi_j) - np.log1p(-phi_j)])
    z_new, accepted, _ = rwmh_step(z0, log_target_z, scale, rng)
    return float(np.tanh(0.5 * z_new[0])), accepted


def sample_sigma2_h(
    *,
    h_j: np.ndarray,
    phi_j: float,
    prior_shape: float,
    prior_rate: float,
    rng: np.random.Generator,
) -> float:
    """Conjugate inverse-gamma draw of the log-variance innovation variance."""
    t_len = h_j.shape[0]
    sq = (1.0 - phi_j * phi_j) * h_j[0] ** 2 + float(np.sum((h_j[1:] - phi_j * h_j[:-1]) ** 2))
    shape = prior_shape + 0.5 * t_len
    rate = prior_rate + 0.5 * sq
    return float(rate / rng.gamma(shape))
