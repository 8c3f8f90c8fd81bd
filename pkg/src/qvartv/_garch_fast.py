"""Jitted kernel for the GARCH mixing-variable sweep.

Updating w_t requires the conditional likelihood of every observation from t
onward with the variance recursion replayed under the proposal, an O(T) cost
per time index and O(T^2) per sweep. This module fuses the recursion and the
per-observation Gaussian terms into one compiled pass; correctness against the
plain numpy evaluation is asserted in the test suite.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_LOG_2PI = float(np.log(2.0 * np.pi))
_OVERFLOW = 1e100


@njit(cache=True)
def garch_recursion_kernel(
    omega: np.ndarray,
    alpha: np.ndarray,
    gamma: np.ndarray,
    ybar: np.ndarray,
    theta1: np.ndarray,
    w: np.ndarray,
    sigma2_init: np.ndarray,
):
    """Forward variance recursion for all series; returns (paths, ok)."""
    t_len, n = ybar.shape
    sig2 = np.empty((t_len, n))
    for j in range(n):
        sig2[0, j] = sigma2_init[j]
    for t in range(1, t_len):
        for j in range(n):
            resid = ybar[t - 1, j] - w[t - 1] * theta1[j] * np.sqrt(sig2[t - 1, j])
            nxt = omega[j] + alpha[j] * resid * resid + gamma[j] * sig2[t - 1, j]
            if not nxt < _OVERFLOW:
                return sig2, t
            sig2[t, j] = nxt
    return sig2, 0


@njit(cache=True)
def garch_w_tail(
    t0: int,
    w_t0: float,
    ybar: np.ndarray,
    theta1: np.ndarray,
    log_theta2_sum: float,
    m: np.ndarray,
    w: np.ndarray,
    sig2_t0: np.ndarray,
    omega: np.ndarray,
    alpha: np.ndarray,
    gamma: np.ndarray,
):
    """Per-time log-likelihood contributions and variance paths from t0 on.

    The mixing variable at t0 is overridden by ``w_t0``; sig2_t0 is the
    (unchanged) variance vector at t0. Returns (ll, sig_tail, ok); ``ok`` is
    False when the recursion overflowed and the outputs are unusable.
    """
    t_len, n = ybar.shape
    length = t_len - t0
    ll = np.empty(length)
    sig_tail = np.empty((length, n))
    for j in range(n):
        sig_tail[0, j] = sig2_t0[j]
    for offset in range(length):
        ell = t0 + offset
        w_ell = w_t0 if ell == t0 else w[ell]
        quad = 0.0
        logdet_h = 0.0
        for i in range(n):
            logdet_h += np.log(sig_tail[offset, i])
        for i in range(n):
            s_i = 0.0
            for j in range(n):
                s_i += m[i, j] * (
                    ybar[ell, j] - w_ell * np.sqrt(sig_tail[offset, j]) * theta1[j]
                )
            quad += s_i * s_i / sig_tail[offset, i]
        ll[offset] = -0.5 * (
            n * _LOG_2PI + n * np.log(w_ell) + 2.0 * log_theta2_sum + logdet_h + quad / w_ell
        )
        if offset + 1 < length:
            for j in range(n):
                resid = ybar[ell, j] - w_ell * theta1[j] * np.sqrt(sig_tail[offset, j])
                nxt = omega[j] + alpha[j] * resid * resid + gamma[j] * sig_tail[offset, j]
                if not nxt < _OVERFLOW:
                    return ll, sig_tail, False
                sig_tail[offset + 1, j] = nxt
    return ll, sig_tail, True
