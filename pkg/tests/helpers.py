"""Shared test utilities: random model states and quadrature-based KS oracles."""

from __future__ import annotations

import numpy as np
from scipy import integrate

from qvartv.core import QuantileLevels, theta_params
from qvartv.distributions import GiGParams, gig_logpdf


def random_scale_state(rng, n, t_len=1, tau=None):
    """Random valid (theta, A, h, w) tuple for likelihood and block tests."""
    tau = np.full(n, 0.5) if tau is None else np.asarray(tau, dtype=float)
    theta = theta_params(QuantileLevels(tau))
    a = np.eye(n)
    if n > 1:
        a[np.tril_indices(n, -1)] = rng.normal(0.0, 0.5, n * (n - 1) // 2)
    h = np.exp(rng.normal(0.0, 0.7, (t_len, n)))
    w = rng.exponential(size=t_len) + 0.05
    return theta, a, h, w


def gig_grid_cdf(params: GiGParams, x: np.ndarray):
    """Quadrature CDF oracle on a dense grid covering the draws' range."""
    lo = min(x.min() * 0.5, 1e-9)
    hi = x.max() * 2.0
    grid = np.exp(np.linspace(np.log(lo), np.log(hi), 40_000))
    pdf = np.exp(gig_logpdf(grid, params))
    cdf = integrate.cumulative_trapezoid(pdf, grid, initial=0.0)
    cdf = np.clip(cdf / cdf[-1], 0.0, 1.0)
    return np.interp(x, grid, cdf)


def ks_distance(draws: np.ndarray, params: GiGParams) -> float:
    """Kolmogorov-Smirnov distance of draws against the quadrature CDF."""
    x = np.sort(np.asarray(draws, dtype=float))
    cdf = gig_grid_cdf(params, x)
    n = x.shape[0]
    upper = np.max(np.abs(cdf - np.arange(1, n + 1) / n))
    lower = np.max(np.abs(cdf - np.arange(0, n) / n))
    return max(upper, lower)


def empirical_ks(draws: np.ndarray, grid: np.ndarray, cdf: np.ndarray) -> float:
    """KS distance of draws against a tabulated CDF."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.shape[0]
    vals = np.interp(x, grid, cdf)
    upper = np.max(np.abs(vals - np.arange(1, n + 1) / n))
    lower = np.max(np.abs(vals - np.arange(0, n) / n))
    return max(upper, lower)
