from __future__ import annotations

import numpy as np
import pytest

from qvartv.adapt import AdaptiveScale, adapt
from qvartv.core import QuantileLevels, theta_params
from qvartv.sv import (
    ar1_log_prior,
    sample_h_path,
    sample_phi,
    sample_sigma2_h,
    sv_transformed_response,
)


class TestTransformedResponse:
    def test_scalar_collapse(self, rng):
        # n=1: the transformed response is y / (sqrt(w) theta2)
        theta = theta_params(QuantileLevels(np.array([0.3])))
        ybar = rng.normal(size=(6, 1))
        w = rng.exponential(size=6) + 0.2
        h = rng.normal(size=(6, 1))
        out = sv_transformed_response(ybar=ybar, theta=theta, a=np.eye(1), h=h, w=w, j=0)
        np.testing.assert_allclose(out, ybar / (np.sqrt(w)[:, None] * theta.theta2[0]), atol=1e-12)

    def test_median_case_ignores_volatility(self, rng):
        # theta1 = 0 at the median: the response is A_t^(-1) ybar, free of h
        n = 3
        theta = theta_params(QuantileLevels(np.full(n, 0.5)))
        a = np.eye(n)
        a[np.tril_indices(n, -1)] = rng.normal(size=3)
        ybar = rng.normal(size=(5, n))
        w = rng.exponential(size=5) + 0.2
        one = sv_transformed_response(ybar=ybar, theta=theta, a=a, h=np.zeros((5, n)), w=w, j=1)
        other = sv_transformed_response(
            ybar=ybar, theta=theta, a=a, h=rng.normal(size=(5, n)), w=w, j=1
        )
        np.testing.assert_allclose(one, other, atol=1e-12)

    def test_reconstruction_identity(self, rng):
        n = 3
        tau = rng.uniform(0.15, 0.85, n)
        theta = theta_params(QuantileLevels(tau))
        a = np.eye(n)
        a[np.tril_indices(n, -1)] = rng.normal(0, 0.4, 3)
        h = rng.normal(0, 0.6, (7, n))
        w = rng.exponential(size=7) + 0.1
        ybar = rng.normal(size=(7, n))
        j = 2
        resp = sv_transformed_response(ybar=ybar, theta=theta, a=a, h=h, w=w, j=j)
        from qvartv.likelihood import whitening_matrix

        g = whitening_matrix(a, theta) * theta.theta1[None, :]
        for t in range(7):
            a_t = np.sqrt(w[t]) * np.diag(theta.theta2) @ a
            zbar = resp[t] - np.sqrt(w[t]) * g[:, j] * np.exp(0.5 * h[t, j])
            recovered = a_t @ (np.sqrt(w[t]) * g @ np.exp(0.5 * h[t]) + zbar)
            np.testing.assert_allclose(recovered, ybar[t], atol=1e-9)

    def test_single_time_slice(self, rng):
        theta = theta_params(QuantileLevels(np.array([0.4, 0.6])))
        ybar = rng.normal(size=(4, 2))
        w = np.ones(4)
        h = np.zeros((4, 2))
        full = sv_transformed_response(ybar=ybar, theta=theta, a=np.eye(2), h=h, w=w, j=0)
        row = sv_transformed_response(ybar=ybar, theta=theta, a=np.eye(2), h=h, w=w, j=0, t=2)
        np.testing.assert_array_equal(row, full[2])


class TestHPath:
    def test_degenerate_prior_pins_path_at_zero(self, rng):
        theta = theta_params(QuantileLevels(np.array([0.3])))
        t_len = 12
        ybar = rng.normal(size=(t_len, 1))
        w = np.ones(t_len)
        h = np.zeros((t_len, 1))
        scale = AdaptiveScale(kappa=1.0, target_rate=0.27, frozen=True)
        accepts = 0
        for _ in range(300):
            path, accepted, _ = sample_h_path(
                j=0, ybar=ybar, theta=theta, a=np.eye(1), h=h, w=w,
                phi=np.array([0.0]), sigma2_h=np.array([1e-12]),
                proposal_var=np.ones(t_len), scale=scale, rng=rng,
            )
            accepts += accepted
            h[:, 0] = path
        assert accepts == 0
        np.testing.assert_array_equal(h, 0.0)

    def test_self_consistency_recovers_path_shape(self, rng):
        # simulate from the SV quantile model itself and check the fitted
        # log-variance path tracks the truth (correlation assertion comes in
        # the acceptance suite at full scale)
        from qvartv.sampler import MCMCSettings, QuantileModelSpec, VolRegime, fit_quantile_model

        t_len, n = 300, 1
        phi_true, s2_true = 0.97, 0.09
        h_true = np.empty(t_len + 1)
        h_true[0] = rng.normal(0, np.sqrt(s2_true / (1 - phi_true**2)))
        for t in range(1, t_len + 1):
            h_true[t] = phi_true * h_true[t - 1] + np.sqrt(s2_true) * rng.standard_normal()
        theta = theta_params(QuantileLevels(np.array([0.5])))
        w = rng.exponential(size=t_len + 1)
        z = rng.standard_normal(t_len + 1)
        values = (
            np.sqrt(np.exp(h_true)) * theta.theta1[0] * w
            + np.sqrt(w) * theta.theta2[0] * np.sqrt(np.exp(h_true)) * z
        )[:, None]
        spec = QuantileModelSpec(
            tau=0.5, lag_order=1, regime=VolRegime.SV,
            mcmc=MCMCSettings(draws=800, burn_in=800),
        )
        draws = fit_quantile_model(values, spec, seed=5)
        h_mean = draws.h.mean(axis=0)[:, 0]
        corr = np.corrcoef(h_mean, h_true[1:])[0, 1]
        assert corr > 0.6


class TestPhi:
    def test_recovers_persistence(self, rng):
        t_len = 2000
        phi_true, s2 = 0.9, 0.04
        h = np.empty(t_len)
        h[0] = rng.normal(0, np.sqrt(s2 / (1 - phi_true**2)))
        for t in range(1, t_len):
            h[t] = phi_true * h[t - 1] + np.sqrt(s2) * rng.standard_normal()
        # Yule-Walker oracle
        yw = float(np.corrcoef(h[1:], h[:-1])[0, 1])
        phi = 0.5
        scale = AdaptiveScale(kappa=0.05, target_rate=0.3)
        draws = np.empty(6000)
        for i in range(draws.shape[0]):
            phi, accepted = sample_phi(
                phi_j=phi, h_j=h, sigma2_h_j=s2, prior_a=1.0, prior_b=1.0,
                scale=scale, rng=rng,
            )
            scale = adapt(scale, accepted)
            draws[i] = phi
        post_mean = draws[1000:].mean()
        assert post_mean == pytest.approx(0.9, abs=0.05)
        assert post_mean == pytest.approx(yw, abs=0.05)

    def test_iid_path_concentrates_near_zero(self, rng):
        h = rng.normal(0, 1.0, 1500)
        phi = 0.4
        scale = AdaptiveScale(kappa=0.05, target_rate=0.3)
        draws = np.empty(4000)
        for i in range(draws.shape[0]):
            phi, accepted = sample_phi(
                phi_j=phi, h_j=h, sigma2_h_j=1.0, prior_a=1.0, prior_b=1.0,
                scale=scale, rng=rng,
            )
            scale = adapt(scale, accepted)
            draws[i] = phi
        assert abs(draws[1000:].mean()) < 0.06

    def test_prior_dominance_keeps_support(self, rng):
        h = rng.normal(0, 0.1, 50)
        phi = 0.0
        scale = AdaptiveScale(kappa=0.3, target_rate=0.3)
        for _ in range(2000):
            phi, accepted = sample_phi(
                phi_j=phi, h_j=h, sigma2_h_j=1.0, prior_a=1e6, prior_b=1.0,
                scale=scale, rng=rng,
            )
            scale = adapt(scale, accepted)
            assert abs(phi) < 1.0
        assert phi > 0.99


class TestSigma2H:
    def test_zero_path_reduces_to_prior_update(self, rng):
        draws = np.array(
            [
                sample_sigma2_h(h_j=np.zeros(40), phi_j=0.3, prior_shape=3.0, prior_rate=2.0, rng=rng)
                for _ in range(60_000)
            ]
        )
        # IG(3 + 20, 2): mean 2 / 22
        assert draws.mean() == pytest.approx(2.0 / 22.0, rel=0.02)

    def test_recovers_variance(self, rng):
        h = rng.normal(0, np.sqrt(2.0), 5000)
        draws = np.array(
            [
                sample_sigma2_h(h_j=h, phi_j=0.0, prior_shape=0.01, prior_rate=0.01, rng=rng)
                for _ in range(3000)
            ]
        )
        assert draws.mean() == pytest.approx(2.0, abs=0.1)

    def test_positive(self, rng):
        for _ in range(200):
            value = sample_sigma2_h(
                h_j=rng.normal(size=10), phi_j=0.5, prior_shape=2.0, prior_rate=0.5, rng=rng
            )
            assert value > 0.0


def test_ar1_log_prior_matches_scipy(rng):
    from scipy.stats import norm

    path = rng.normal(size=8)
    phi, s2 = 0.7, 0.3
    want = norm.logpdf(path[0], 0.0, np.sqrt(s2 / (1 - phi**2)))
    for t in range(1, 8):
        want += norm.logpdf(path[t], phi * path[t - 1], np.sqrt(s2))
    assert ar1_log_prior(path, phi, s2) == pytest.approx(want, abs=1e-10)
