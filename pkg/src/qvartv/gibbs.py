"""Gibbs blocks shared across the constant, SV, and GARCH scale regimes.

The coefficient vector and the free rows of the triangular mixing matrix have
Gaussian full conditionals under the constant and SV regimes; the mixing
variables w_t follow a generalized inverse Gaussian. The constant-scale
benchmark updates its per-series variances by log-normal random-walk MH since
the scale enters both the conditional mean and covariance.

Posterior moments are formed through Cholesky factor solves; the only explicit
inverse is the exact triangular back-solve recovering A from its sampled
inverse rows.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .adapt import AdaptiveScale, rwmh_lognormal_step
from .core import RegressionDesign, ThetaParams
from .distributions import gig_sample_many
from .likelihood import conditional_loglik_direct, whitening_matrix

__all__ = [
    "NumericalPosteriorError",
    "sample_beta_gaussian",
    "sample_a_rows",
    "gig_conditional_params",
    "sample_w_gig",
    "sample_w_all",
    "sample_delta2_const",
]

GIG_DEGENERATE_EPS = 1e-12


class NumericalPosteriorError(RuntimeError):
    """A posterior covariance factorization failed."""


def _prior_precision(prior_cov: np.ndarray, dim: int) -> np.ndarray:
    cov = np.asarray(prior_cov, dtype=float)
    if cov.ndim == 0:
        return np.eye(dim) / float(cov)
    if cov.ndim == 1:
        return np.diag(1.0 / cov)
    return np.linalg.inv(cov)


def _draw_gaussian_from_precision(
    precision: np.ndarray, shift: np.ndarray, rng: np.random.Generator, label: str
) -> tuple[np.ndarray, np.ndarray]:
    """Draw from N(P^(-1) shift, P^(-1)) via one Cholesky of P."""
    try:
        lower = cholesky(precision, lower=True)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(precision)
        raise NumericalPosteriorError(
            f"{label}: posterior precision is not positive definite (condition number {cond:.3e})"
        ) from exc
    mean = cho_solve((lower, True), shift)
    eps = rng.standard_normal(shift.shape[0])
    draw = mean + solve_triangular(lower, eps, lower=True, trans=1)
    return draw, mean


def sample_beta_gaussian(
    *,
    design: RegressionDesign,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    w: np.ndarray,
    prior_mean: np.ndarray,
    prior_cov: np.ndarray,
    rng: np.random.Generator,
    return_moments: bool = False,
):
    """Exact Gaussian conditional draw of the stacked coefficient vector.

    Valid when the variance paths ``h`` do not depend on beta (constant and SV
    regimes). The per-time precision has Kronecker structure
    X_t' S_t^(-1) X_t = S_t^(-1) (x) x_t x_t', accumulated over t.
    """
    y, x = design.y, design.x
    n, k = design.n, design.k
    sqrt_h = np.sqrt(h)
    m = whitening_matrix(a, theta)
    inv_wh = 1.0 / (w[:, None] * h)
    omega = np.einsum("ji,tj,jl->til", m, inv_wh, m)
    prec_data = np.einsum("tij,tk,tl->ikjl", omega, x, x).reshape(n * k, n * k)
    ytil = y - w[:, None] * sqrt_h * theta.theta1[None, :]
    rhs_data = np.einsum("tij,tj,tk->ik", omega, ytil, x).reshape(n * k)

    prior_prec = _prior_precision(prior_cov, n * k)
    prior_mean = np.broadcast_to(np.asarray(prior_mean, dtype=float), (n * k,))
    precision = prior_prec + prec_data
    shift = prior_prec @ prior_mean + rhs_data
    draw, mean = _draw_gaussian_from_precision(precision, shift, rng, "beta block")
    if return_moments:
        return draw, mean, precision
    return draw


def sample_a_rows(
    *,
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    h: np.ndarray,
    w: np.ndarray,
    prior_mean: float | np.ndarray,
    prior_var: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw the free rows of A^(-1) from their Gaussian conditionals; return A.

    Equation j regresses the j-th scaled residual on the negated preceding
    ones with per-observation variances w_t H_t[j]; A is recovered by an exact
    triangular back-solve, so it stays unit lower triangular exactly.
    """
    n = theta.n
    sqrt_h = np.sqrt(h)
    u = y - locations - w[:, None] * sqrt_h * theta.theta1[None, :]
    uhat = u / theta.theta2[None, :]
    a_bar = np.eye(n)
    for j in range(1, n):
        regressors = -uhat[:, :j]
        inv_var = 1.0 / (w * h[:, j])
        weighted = regressors * inv_var[:, None]
        prec = np.eye(j) / prior_var + weighted.T @ regressors
        mean_j = np.broadcast_to(np.asarray(prior_mean, dtype=float), (j,))
        shift = mean_j / prior_var + weighted.T @ uhat[:, j]
        draw, _ = _draw_gaussian_from_precision(prec, shift, rng, f"a-row block j={j}")
        a_bar[j, :j] = draw
    return solve_triangular(a_bar, np.eye(n), lower=True)


def gig_conditional_params(
    *,
    ybar: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Parameters (p, a_t, b_t) of the mixing variables' GiG full conditional.

    p = 1 - n/2; a_t = 2 + theta1' H^(1/2) S^(-1) H^(1/2) theta1 and
    b_t = ybar_t' S^(-1) ybar_t with S = Theta2 A H A' Theta2 and
    ybar_t = y_t - X_t beta.
    """
    ybar = np.atleast_2d(np.asarray(ybar, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    n = theta.n
    m = whitening_matrix(a, theta)
    shift = np.sqrt(h) * theta.theta1[None, :]
    s1 = shift @ m.T
    s2 = ybar @ m.T
    a_par = 2.0 + np.sum(s1 * s1 / h, axis=1)
    b_par = np.sum(s2 * s2 / h, axis=1)
    return 1.0 - n / 2.0, a_par, b_par


def _guard_degenerate_b(p: float, b_par: np.ndarray) -> np.ndarray:
    if p <= 0.0 and np.any(b_par <= 0.0):
        warnings.warn(
            "mixing-variable conditional hit b = 0 with non-positive order; "
            f"flooring at {GIG_DEGENERATE_EPS} (residual exactly zero)",
            RuntimeWarning,
            stacklevel=3,
        )
        b_par = np.maximum(b_par, GIG_DEGENERATE_EPS)
    return b_par


def sample_w_gig(
    *,
    ybar_t: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h_t: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Draw a single mixing variable from its GiG full conditional."""
    p, a_par, b_par = gig_conditional_params(
        ybar=ybar_t[None, :], theta=theta, a=a, h=h_t[None, :]
    )
    b_par = _guard_degenerate_b(p, b_par)
    return float(gig_sample_many(p, a_par, b_par, rng)[0])


def sample_w_all(
    *,
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw the whole vector of mixing variables (conditionally independent)."""
    p, a_par, b_par = gig_conditional_params(ybar=y - locations, theta=theta, a=a, h=h)
    b_par = _guard_degenerate_b(p, b_par)
    return gig_sample_many(p, a_par, b_par, rng)


def sample_delta2_const(
    *,
    j: int,
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    delta2: np.ndarray,
    w: np.ndarray,
    prior_shape: float,
    prior_rate: float,
    scale: AdaptiveScale,
    rng: np.random.Generator,
) -> tuple[float, bool]:
    """Log-normal RWMH update of one constant-scale variance delta_j^2.

    The scale enters both the conditional mean and the covariance, so there is
    no conjugate conditional; the target is the inverse-gamma prior times the
    full conditional Gaussian likelihood.
    """
    t_len = y.shape[0]

    def log_target(d2_vec: np.ndarray) -> float:
        d2 = float(d2_vec[0])
        trial = delta2.copy()
        trial[j] = d2
        h = np.broadcast_to(trial, (t_len, trial.shape[0]))
        prior = -(prior_shape + 1.0) * np.log(d2) - prior_rate / d2
        return prior + conditional_loglik_direct(y, locations, theta, a, h, w)

    new, accepted, _ = rwmh_lognormal_step(
        np.array([delta2[j]]), log_target, scale, rng
    )
    return float(new[0]), accepted
