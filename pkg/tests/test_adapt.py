from __future__ import annotations

import numpy as np
import pytest

from qvartv.adapt import KAPPA_MAX, AdaptiveScale, adapt, rwmh_lognormal_step, rwmh_step


class StubRNG:
    """Fixed proposal step and acceptance uniform, for exact MH-ratio checks."""

    def __init__(self, step, uniform):
        self._step = np.atleast_1d(np.asarray(step, dtype=float))
        self._uniform = uniform

    def standard_normal(self, shape=None):
        return self._step if shape else self._step[0]

    def uniform(self):
        return self._uniform


class TestAdapt:
    def test_alternating_stream_converges(self):
        scale = AdaptiveScale(kappa=1.0, target_rate=0.5)
        log_kappas = [0.0]
        for m in range(2_000):
            scale = adapt(scale, accepted=(m % 2 == 0))
            log_kappas.append(np.log(scale.kappa))
        steps = np.abs(np.diff(log_kappas))
        # diminishing adaptation bound and shrinking oscillation
        for m, step in enumerate(steps, start=1):
            assert step <= m ** (-0.6) + 1e-12
        # the sequence settles: late oscillations far below the early ones
        early = np.asarray(log_kappas[:100])
        late = np.asarray(log_kappas[-100:])
        assert late.max() - late.min() < 0.05 * (early.max() - early.min())

    def test_always_accept_grows_to_clamp(self):
        scale = AdaptiveScale(kappa=1.0, target_rate=0.27, decay_exponent=0.51)
        previous = scale.kappa
        for _ in range(200_000):
            scale = adapt(scale, accepted=True)
            assert scale.kappa >= previous
            previous = scale.kappa
        assert scale.kappa == pytest.approx(KAPPA_MAX)

    def test_frozen_scale_is_constant(self):
        scale = AdaptiveScale(kappa=0.7, target_rate=0.3, frozen=True)
        for _ in range(10):
            scale = adapt(scale, accepted=True)
        assert scale.kappa == 0.7

    def test_validation(self):
        with pytest.raises(ValueError):
            AdaptiveScale(kappa=1.0, target_rate=1.5)
        with pytest.raises(ValueError):
            AdaptiveScale(kappa=1.0, target_rate=0.3, decay_exponent=0.4)


class TestRwmhStep:
    def test_standard_gaussian_moments(self, rng):
        log_target = lambda x: -0.5 * float(x @ x)
        x = np.zeros(1)
        scale = AdaptiveScale(kappa=2.4**2, target_rate=0.44)
        draws = np.empty(60_000)
        lp = log_target(x)
        for i in range(draws.shape[0]):
            x, accepted, lp = rwmh_step(x, log_target, scale, rng, current_log_target=lp)
            scale = adapt(scale, accepted)
            draws[i] = x[0]
        kept = draws[10_000:]
        assert kept.mean() == pytest.approx(0.0, abs=0.02)
        assert kept.var() == pytest.approx(1.0, abs=0.05)

    def test_vanishing_scale_accepts_everything(self, rng):
        log_target = lambda x: -0.5 * float(x @ x)
        scale = AdaptiveScale(kappa=1e-6, target_rate=0.3, frozen=True)
        x = np.array([0.3])
        accepts = 0
        for _ in range(500):
            _, accepted, _ = rwmh_step(x, log_target, scale, rng)
            accepts += accepted
        assert accepts / 500 > 0.99

    def test_acceptance_equals_density_ratio(self):
        # downhill move from the mode of a standard Gaussian
        log_target = lambda x: -0.5 * float(x @ x)
        scale = AdaptiveScale(kappa=1.0, target_rate=0.3)
        ratio = np.exp(log_target(np.array([1.3])) - log_target(np.array([0.0])))
        for eps in (-1e-9, 1e-9):
            stub = StubRNG(step=[1.3], uniform=ratio + eps)
            new, accepted, _ = rwmh_step(np.zeros(1), log_target, scale, stub)
            assert accepted == (eps < 0)

    def test_nan_current_target_raises(self, rng):
        with pytest.raises(ValueError, match="NaN"):
            rwmh_step(np.zeros(1), lambda x: np.nan, AdaptiveScale(), rng)

    def test_nonfinite_proposal_rejected(self, rng):
        log_target = lambda x: -np.inf if x[0] != 0.0 else 0.0
        new, accepted, lp = rwmh_step(np.zeros(1), log_target, AdaptiveScale(), rng)
        assert not accepted and new[0] == 0.0 and lp == 0.0


class TestRwmhLognormalStep:
    def test_exponential_target_mean(self, rng):
        log_target = lambda x: -float(x[0])  # Exp(1) up to the support constant
        x = np.array([1.0])
        scale = AdaptiveScale(kappa=1.5, target_rate=0.44)
        draws = np.empty(120_000)
        lp = log_target(x)
        for i in range(draws.shape[0]):
            x, accepted, lp = rwmh_lognormal_step(x, log_target, scale, rng, current_log_target=lp)
            scale = adapt(scale, accepted)
            draws[i] = x[0]
        assert draws[20_000:].mean() == pytest.approx(1.0, abs=0.02)

    def test_jacobian_detailed_balance(self):
        # two-point ratio: pi(x) q(x->y) alpha(x->y) == pi(y) q(y->x) alpha(y->x)
        log_target = lambda v: -float(v[0])
        x, y = 0.8, 1.7
        kappa = 0.49

        def lognormal_density(to, frm):
            z = (np.log(to) - np.log(frm)) ** 2 / (2 * kappa)
            return np.exp(-z) / (to * np.sqrt(2 * np.pi * kappa))

        # acceptance probability the implementation uses
        r_xy = np.exp(log_target([y]) - log_target([x]) + np.log(y) - np.log(x))
        r_yx = np.exp(log_target([x]) - log_target([y]) + np.log(x) - np.log(y))
        lhs = np.exp(log_target([x])) * lognormal_density(y, x) * min(1.0, r_xy)
        rhs = np.exp(log_target([y])) * lognormal_density(x, y) * min(1.0, r_yx)
        assert lhs == pytest.approx(rhs, rel=1e-12)
        # and the implementation's accept decision matches r_xy exactly
        step = (np.log(y) - np.log(x)) / np.sqrt(kappa)
        scale = AdaptiveScale(kappa=kappa, target_rate=0.3)
        for eps in (-1e-9, 1e-9):
            stub = StubRNG(step=[step], uniform=min(1.0, r_xy) + eps)
            _, accepted, _ = rwmh_lognormal_step(np.array([x]), log_target, scale, stub)
            assert accepted == (eps < 0)

    def test_vanishing_scale_stays_near_start(self, rng):
        log_target = lambda v: -float(v[0])
        scale = AdaptiveScale(kappa=1e-6, target_rate=0.3, frozen=True)
        x = np.array([2.0])
        accepts = 0
        for _ in range(300):
            x, accepted, _ = rwmh_lognormal_step(x, log_target, scale, rng)
            accepts += accepted
        assert accepts / 300 > 0.98
        assert x[0] == pytest.approx(2.0, abs=0.05)

    def test_requires_positive_state(self, rng):
        with pytest.raises(ValueError, match="positive"):
            rwmh_lognormal_step(np.array([-1.0]), lambda v: 0.0, AdaptiveScale(), rng)
