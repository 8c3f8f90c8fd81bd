"""Adaptive random-walk Metropolis-Hastings with Robbins-Monro scale tuning.

The scalar proposal scale kappa is nudged after every step by
log kappa += m^(-decay) * (accepted - target_rate), which satisfies the
diminishing-adaptation condition for decay in (0.5, 1]. Scales can be frozen
(e.g. at the end of burn-in) to make the remaining chain exactly Markov.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["AdaptiveScale", "adapt", "rwmh_step", "rwmh_lognormal_step"]

KAPPA_MIN = 1e-6
KAPPA_MAX = 1e6


@dataclass(frozen=True)
class AdaptiveScale:
    """Current proposal scale of one MH block, with its adaptation settings."""

    kappa: float = 1.0
    target_rate: float = 0.30
    iteration: int = 0
    decay_exponent: float = 0.6
    frozen: bool = False

    def __post_init__(self):
        if not 0.0 < self.target_rate < 1.0:
            raise ValueError("target_rate must lie in (0, 1)")
        if not 0.5 < self.decay_exponent <= 1.0:
            raise ValueError("decay_exponent must lie in (0.5, 1]")
        if not KAPPA_MIN <= self.kappa <= KAPPA_MAX:
            object.__setattr__(self, "kappa", float(np.clip(self.kappa, KAPPA_MIN, KAPPA_MAX)))


def adapt(scale: AdaptiveScale, accepted: bool) -> AdaptiveScale:
    """One Robbins-Monro update of the proposal scale; no-op when frozen."""
    m = scale.iteration + 1
    if scale.frozen:
        return dataclasses.replace(scale, iteration=m)
    gamma_m = m ** (-scale.decay_exponent)
    log_kappa = np.log(scale.kappa) + gamma_m * (float(accepted) - scale.target_rate)
    kappa = float(np.clip(np.exp(log_kappa), KAPPA_MIN, KAPPA_MAX))
    return dataclasses.replace(scale, kappa=kappa, iteration=m)


def _propose_gaussian(
    current: np.ndarray,
    kappa: float,
    proposal_cov: np.ndarray | None,
    rng: np.random.Generator,
) -> np.ndarray:
    eps = rng.standard_normal(current.shape)
    if proposal_cov is None:
        step = eps
    elif proposal_cov.ndim == 1:
        step = np.sqrt(proposal_cov) * eps
    else:
        step = np.linalg.cholesky(proposal_cov) @ eps
    return current + np.sqrt(kappa) * step


def rwmh_step(
    current: np.ndarray,
    log_target: Callable[[np.ndarray], float],
    scale: AdaptiveScale,
    rng: np.random.Generator,
    *,
    proposal_cov: np.ndarray | None = None,
    current_log_target: float | None = None,
) -> tuple[np.ndarray, bool, float]:
    """Gaussian random-walk MH step with proposal covariance kappa * S.

    ``proposal_cov`` is the fixed S (diagonal as a 1-D vector, or a full
    matrix; identity when omitted). Returns (state, accepted, log_target at the
    returned state); pass ``current_log_target`` to reuse a cached evaluation.
    """
    current = np.atleast_1d(np.asarray(current, dtype=float))
    lp_cur = log_target(current) if current_log_target is None else current_log_target
    if np.isnan(lp_cur):
        raise ValueError("log_target is NaN at the current state")
    proposal = _propose_gaussian(current, scale.kappa, proposal_cov, rng)
    lp_prop = log_target(proposal)
    if np.isnan(lp_prop) or lp_prop == -np.inf:
        return current, False, lp_cur
    if np.log(rng.uniform()) < lp_prop - lp_cur:
        return proposal, True, lp_prop
    return current, False, lp_cur


def rwmh_lognormal_step(
    current: np.ndarray,
    log_target: Callable[[np.ndarray], float],
    scale: AdaptiveScale,
    rng: np.random.Generator,
    *,
    proposal_cov: np.ndarray | None = None,
    current_log_target: float | None = None,
) -> tuple[np.ndarray, bool, float]:
    """Random walk on log coordinates of a positive vector.

    The Jacobian of the log transform enters the MH ratio as
    sum(log proposal - log current), so the target is evaluated on the
    original scale.
    """
    current = np.atleast_1d(np.asarray(current, dtype=float))
    if np.any(current <= 0.0):
        raise ValueError("lognormal random walk requires a strictly positive state")
    lp_cur = log_target(current) if current_log_target is None else current_log_target
    if np.isnan(lp_cur):
        raise ValueError("log_target is NaN at the current state")
    log_prop = _propose_gaussian(np.log(current), scale.kappa, proposal_cov, rng)
    proposal = np.exp(log_prop)
    lp_prop = log_target(proposal)
    if np.isnan(lp_prop) or lp_prop == -np.inf:
        return current, False, lp_cur
    log_ratio = lp_prop - lp_cur + np.sum(log_prop - np.log(current))
    if np.log(rng.uniform()) < log_ratio:
        return proposal, True, lp_prop
    return current, False, lp_cur
