"""GARCH(1,1) regime: variance recursions and the non-conjugate MH updates.

The variance paths are deterministic given parameters, data, and the mixing
variables, so the statics, the mixing variables, and the coefficient vector
all require Metropolis updates: every one of them moves the variance paths.
All targets evaluate the exact conditional Gaussian likelihood with the paths
recomputed under the proposal; acceptance rates are tuned to 0.30.
"""

from __future__ import annotations

import numpy as np

from .adapt import AdaptiveScale, rwmh_lognormal_step, rwmh_step
from .core import RegressionDesign, ThetaParams
from .likelihood import conditional_loglik_direct, whitening_matrix

__all__ = [
    "garch_recursion",
    "garch_recursion_series",
    "unconditional_variance",
    "sample_garch_statics",
    "sample_w_garch",
    "sample_beta_garch",
]

_OVERFLOW = 1e100


def garch_recursion_series(
    *,
    omega: float,
    alpha: float,
    gamma: float,
    y_j: np.ndarray,
    loc_j: np.ndarray,
    theta1_j: float,
    w: np.ndarray,
    sigma2_init_j: float,
) -> np.ndarray:
    """Forward variance recursion for one series.

    sigma2_t = omega + alpha * (y_{t-1} - loc_{t-1} - w_{t-1} theta1 sigma_{t-1})^2
    + gamma * sigma2_{t-1}; the squared innovation carries the mixture's
    location shift, so the recursion depends on the mixing variables.
    """
    from ._garch_fast import garch_recursion_kernel

    ybar = (y_j - loc_j)[:, None]
    sig2, bad_t = garch_recursion_kernel(
        np.array([omega]), np.array([alpha]), np.array([gamma]),
        ybar, np.array([theta1_j]), np.asarray(w, dtype=float),
        np.array([sigma2_init_j]),
    )
    if bad_t:
        raise OverflowError(f"variance recursion overflowed at t={bad_t}")
    return sig2[:, 0]


def garch_recursion(
    *,
    omega: np.ndarray,
    alpha: np.ndarray,
    gamma: np.ndarray,
    y: np.ndarray,
    locations: np.ndarray,
    theta1: np.ndarray,
    w: np.ndarray,
    sigma2_init: np.ndarray,
) -> np.ndarray:
    """All series' variance paths, shape (T, n)."""
    from ._garch_fast import garch_recursion_kernel

    sig2, bad_t = garch_recursion_kernel(
        np.asarray(omega, dtype=float), np.asarray(alpha, dtype=float),
        np.asarray(gamma, dtype=float), np.asarray(y - locations, dtype=float),
        np.asarray(theta1, dtype=float), np.asarray(w, dtype=float),
        np.asarray(sigma2_init, dtype=float),
    )
    if bad_t:
        raise OverflowError(f"variance recursion overflowed at t={bad_t}")
    return sig2


def unconditional_variance(
    omega: np.ndarray, alpha: np.ndarray, gamma: np.ndarray
) -> np.ndarray:
    return omega / (1.0 - alpha - gamma)


def sample_garch_statics(
    *,
    j: int,
    params_j: np.ndarray,
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    sigma2: np.ndarray,
    w: np.ndarray,
    prior_mean: np.ndarray,
    prior_var: np.ndarray,
    scale: AdaptiveScale,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Joint log-normal RWMH update of params_j = (omega_j, alpha_j, gamma_j).

    Proposals violating alpha + gamma < 1 fall outside the prior support and
    are rejected. The initial variance is pinned to the proposal's
    unconditional level omega / (1 - alpha - gamma). Returns the new triple,
    the series-j variance path under it, and the acceptance flag.
    """
    prior_sd = np.sqrt(np.asarray(prior_var, dtype=float))
    prior_mean = np.asarray(prior_mean, dtype=float)

    def path_for(params: np.ndarray) -> np.ndarray | None:
        om, al, ga = params
        if al + ga >= 1.0:
            return None
        try:
            return garch_recursion_series(
                omega=float(om), alpha=float(al), gamma=float(ga),
                y_j=y[:, j], loc_j=locations[:, j],
                theta1_j=float(theta.theta1[j]), w=w,
                sigma2_init_j=float(om / (1.0 - al - ga)),
            )
        except OverflowError:
            return None

    def log_target(params: np.ndarray) -> float:
        path = path_for(params)
        if path is None:
            return -np.inf
        logs = np.log(params)
        prior = float(np.sum(-0.5 * ((logs - prior_mean) / prior_sd) ** 2 - logs))
        trial = np.array(sigma2, copy=True)
        trial[:, j] = path
        return prior + conditional_loglik_direct(y, locations, theta, a, trial, w)

    new, accepted, _ = rwmh_lognormal_step(params_j, log_target, scale, rng)
    path = path_for(new)
    assert path is not None
    return new, path, accepted


def _tail_loglik(
    *,
    t0: int,
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    sigma2_tail: np.ndarray,
    w_tail: np.ndarray,
) -> float:
    return conditional_loglik_direct(
        y[t0:], locations[t0:], theta, a, sigma2_tail, w_tail
    )


def sample_w_garch(
    *,
    t: int,
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    omega: np.ndarray,
    alpha: np.ndarray,
    gamma: np.ndarray,
    sigma2: np.ndarray,
    w: np.ndarray,
    scale: AdaptiveScale,
    rng: np.random.Generator,
) -> tuple[float, np.ndarray, bool]:
    """Log-normal RWMH update of one mixing variable under the GARCH regime.

    The target is the Exp(1) prior times the conditional likelihood of all
    observations from t onward: w_t enters the time-t mean and covariance
    directly and every later variance through the recursion, so the paths
    beyond t are recomputed under each proposal. When alpha is identically
    zero the recursion ignores w and only the time-t term remains. Returns the
    accepted value, the variance paths consistent with it, and the flag.
    """
    t_len = y.shape[0]
    recurse = bool(np.any(alpha > 0.0)) and t < t_len - 1

    def paths_from(w_t: float) -> np.ndarray:
        if not recurse:
            return sigma2[t:]
        w_trial = w.copy()
        w_trial[t] = w_t
        tail = np.empty((t_len - t, sigma2.shape[1]))
        tail[0] = sigma2[t]
        prev = sigma2[t]
        for s in range(t + 1, t_len):
            resid = y[s - 1] - locations[s - 1] - w_trial[s - 1] * theta.theta1 * np.sqrt(prev)
            prev = omega + alpha * resid * resid + gamma * prev
            if not np.all(prev < _OVERFLOW):
                raise OverflowError(f"variance recursion overflowed at t={s}")
            tail[s - t] = prev
        return tail

    def log_target(w_vec: np.ndarray) -> float:
        w_t = float(w_vec[0])
        try:
            tail = paths_from(w_t)
        except OverflowError:
            return -np.inf
        w_trial = w.copy()
        w_trial[t] = w_t
        return -w_t + _tail_loglik(
            t0=t, y=y, locations=locations, theta=theta, a=a,
            sigma2_tail=tail, w_tail=w_trial[t:],
        )

    new, accepted, _ = rwmh_lognormal_step(np.array([w[t]]), log_target, scale, rng)
    w_t = float(new[0])
    if accepted and recurse:
        updated = np.array(sigma2, copy=True)
        updated[t:] = paths_from(w_t)
        return w_t, updated, accepted
    return w_t, sigma2, accepted


def w_sweep_garch(
    *,
    y: np.ndarray,
    locations: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    omega: np.ndarray,
    alpha: np.ndarray,
    gamma: np.ndarray,
    sigma2: np.ndarray,
    w: np.ndarray,
    kappas: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """One full pass of log-normal RWMH updates over all mixing variables.

    Same targets as sequential ``sample_w_garch`` calls, but the recursion and
    the tail likelihood are fused into a compiled kernel and the current tail
    value is reused across time indices. ``w`` and ``sigma2`` are updated in
    place; returns the per-index acceptance flags.
    """
    from ._garch_fast import garch_w_tail

    t_len = y.shape[0]
    ybar = y - locations
    m = whitening_matrix(a, theta)
    log_t2 = float(np.sum(np.log(theta.theta2)))
    ll_cur, tail, ok = garch_w_tail(
        0, float(w[0]), ybar, theta.theta1, log_t2, m, w, sigma2[0], omega, alpha, gamma
    )
    if not ok:
        raise OverflowError("variance recursion overflowed at the current state")
    sigma2[:] = tail
    accepts = np.zeros(t_len, dtype=bool)
    tail_sum = float(np.sum(ll_cur))
    sqrt_kappas = np.sqrt(kappas)
    for t in range(t_len):
        current = -w[t] + tail_sum
        z = rng.standard_normal()
        w_star = float(w[t] * np.exp(sqrt_kappas[t] * z))
        ll_prop, tail_prop, ok = garch_w_tail(
            t, w_star, ybar, theta.theta1, log_t2, m, w, sigma2[t], omega, alpha, gamma
        )
        if ok:
            prop_sum = float(np.sum(ll_prop))
            log_ratio = -w_star + prop_sum - current + np.log(w_star) - np.log(w[t])
            if np.log(rng.uniform()) < log_ratio:
                w[t] = w_star
                sigma2[t:] = tail_prop
                ll_cur[t:] = ll_prop
                tail_sum = prop_sum
                accepts[t] = True
        tail_sum -= float(ll_cur[t])
    return accepts


def sample_beta_garch(
    *,
    design: RegressionDesign,
    beta: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    omega: np.ndarray,
    alpha: np.ndarray,
    gamma: np.ndarray,
    sigma2_init: np.ndarray,
    w: np.ndarray,
    prior_mean: np.ndarray,
    prior_cov: np.ndarray,
    scale: AdaptiveScale,
    rng: np.random.Generator,
    proposal_var: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Gaussian RWMH update of the coefficient vector under the GARCH regime.

    The variance paths depend on beta through the recursion residuals, so the
    Gaussian conditional of the other regimes does not apply; the target
    includes the |H_t(beta)|^(-1/2) factors through the full Gaussian
    likelihood with recomputed paths. Returns (beta, paths, accepted).
    """
    nk = design.nk
    prior_mean = np.broadcast_to(np.asarray(prior_mean, dtype=float), (nk,))
    prior_cov = np.asarray(prior_cov, dtype=float)
    if prior_cov.ndim == 0:
        prior_diag = np.full(nk, float(prior_cov))
    elif prior_cov.ndim == 1:
        prior_diag = prior_cov
    else:
        prior_diag = None

    def paths_for(b: np.ndarray) -> np.ndarray:
        return garch_recursion(
            omega=omega, alpha=alpha, gamma=gamma,
            y=design.y, locations=design.locations(b),
            theta1=theta.theta1, w=w, sigma2_init=sigma2_init,
        )

    def log_target(b: np.ndarray) -> float:
        try:
            paths = paths_for(b)
        except OverflowError:
            return -np.inf
        diff = b - prior_mean
        if prior_diag is not None:
            prior = -0.5 * float(np.sum(diff * diff / prior_diag))
        else:
            prior = -0.5 * float(diff @ np.linalg.solve(prior_cov, diff))
        return prior + conditional_loglik_direct(
            design.y, design.locations(b), theta, a, paths, w
        )

    new, accepted, _ = rwmh_step(
        np.asarray(beta, dtype=float), log_target, scale, rng, proposal_cov=proposal_var
    )
    return new, paths_for(new), accepted
