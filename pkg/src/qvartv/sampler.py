"""Metropolis-within-Gibbs drivers for the three volatility regimes.

One sweep updates, in order: the coefficient vector, the free rows of the
triangular mixing matrix, the mixing variables, and the regime's volatility
blocks. Proposal scales adapt toward 0.27 (log-variance paths) or 0.30 (all
other MH blocks) and freeze at the end of burn-in by default, so the kept
draws come from an exactly Markov chain.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .adapt import KAPPA_MAX, KAPPA_MIN, AdaptiveScale, adapt
from .core import (
    ConstVolState,
    GARCHVolState,
    MCMCState,
    QuantileLevels,
    RegressionDesign,
    SVVolState,
    ThetaParams,
    build_var_design,
    theta_params,
)
from .garch import (
    garch_recursion,
    sample_beta_garch,
    sample_garch_statics,
    unconditional_variance,
    w_sweep_garch,
)
from .gibbs import (
    sample_a_rows,
    sample_beta_gaussian,
    sample_delta2_const,
    sample_w_all,
)
from .sv import sample_h_path, sample_phi, sample_sigma2_h

__all__ = [
    "VolRegime",
    "PriorSpec",
    "MCMCSettings",
    "QuantileModelSpec",
    "PosteriorDraws",
    "fit_quantile_model",
]


class VolRegime(str, Enum):
    CONST = "const"
    SV = "sv"
    GARCH = "garch"


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters; defaults are weakly informative for standardized data."""

    beta_mean: float = 0.0
    beta_var: float = 10.0
    a_mean: float = 0.0
    a_var: float = 10.0
    # Beta prior on (1 + phi)/2 and inverse-gamma on the log-variance innovation
    rho_a: float = 20.0
    rho_b: float = 1.5
    sigma_h_shape: float = 2.5
    sigma_h_rate: float = 0.25
    # inverse-gamma on the constant-regime variances
    delta_shape: float = 2.5
    delta_rate: float = 1.5
    # Gaussian moments of (log omega, log alpha, log gamma), truncated to
    # alpha + gamma < 1
    garch_log_mean: tuple[float, float, float] = (
        float(np.log(0.1)),
        float(np.log(0.05)),
        float(np.log(0.8)),
    )
    garch_log_var: tuple[float, float, float] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class MCMCSettings:
    draws: int = 5000
    burn_in: int = 5000
    thin: int = 1
    target_rate_paths: float = 0.27
    target_rate_statics: float = 0.30
    decay_exponent: float = 0.6
    freeze_adaptation_after_burnin: bool = True
    # approximate mode: volatility paths condition on the other series'
    # previous-sweep values, making the per-series blocks independent
    parallel_volatility_conditioning: bool = False

    def __post_init__(self):
        if self.draws < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("invalid chain-length settings")


@dataclass(frozen=True)
class QuantileModelSpec:
    """Everything needed to fit one model at one quantile configuration."""

    tau: float | tuple[float, ...]
    lag_order: int = 1
    intercept: bool = True
    regime: VolRegime = VolRegime.CONST
    priors: PriorSpec = field(default_factory=PriorSpec)
    mcmc: MCMCSettings = field(default_factory=MCMCSettings)

    def tau_vector(self, n: int) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if tau.shape[0] == 1:
            tau = np.repeat(tau, n)
        if tau.shape[0] != n:
            raise ValueError(f"tau has length {tau.shape[0]}, expected 1 or {n}")
        return tau


@dataclass
class PosteriorDraws:
    """Thinned post-burn-in draws with per-block acceptance diagnostics."""

    regime: str
    tau: np.ndarray
    n: int
    k: int
    lag_order: int
    intercept: bool
    beta: np.ndarray          # (M, n*k)
    a: np.ndarray             # (M, n, n)
    w: np.ndarray             # (M, T)
    acceptance: dict[str, float]
    approximate_conditioning: bool = False
    delta2: np.ndarray | None = None        # (M, n) constant regime
    h: np.ndarray | None = None             # (M, T, n) SV regime
    phi: np.ndarray | None = None           # (M, n)
    sigma2_h: np.ndarray | None = None      # (M, n)
    garch_omega: np.ndarray | None = None   # (M, n)
    garch_alpha: np.ndarray | None = None
    garch_gamma: np.ndarray | None = None
    garch_sigma2: np.ndarray | None = None  # (M, T, n)

    @property
    def n_draws(self) -> int:
        return self.beta.shape[0]

    def beta_mean(self) -> np.ndarray:
        return self.beta.mean(axis=0)

    def save_npz(self, path) -> None:
        payload = {
            "regime": np.array(self.regime),
            "tau": self.tau,
            "shape_meta": np.array([self.n, self.k, self.lag_order, int(self.intercept),
                                    int(self.approximate_conditioning)]),
            "beta": self.beta,
            "a": self.a,
            "w": self.w,
            "acceptance_keys": np.array(sorted(self.acceptance)),
            "acceptance_vals": np.array([self.acceptance[k] for k in sorted(self.acceptance)]),
        }
        for name in ("delta2", "h", "phi", "sigma2_h", "garch_omega",
                     "garch_alpha", "garch_gamma", "garch_sigma2"):
            value = getattr(self, name)
            if value is not None:
                payload[name] = value
        np.savez_compressed(path, **payload)

    @classmethod
    def load_npz(cls, path) -> "PosteriorDraws":
        data = np.load(path, allow_pickle=False)
        meta = data["shape_meta"]
        kwargs = {}
        for name in ("delta2", "h", "phi", "sigma2_h", "garch_omega",
                     "garch_alpha", "garch_gamma", "garch_sigma2"):
            if name in data:
                kwargs[name] = data[name]
        acceptance = dict(zip((str(k) for k in data["acceptance_keys"]),
                              (float(v) for v in data["acceptance_vals"])))
        return cls(
            regime=str(data["regime"]),
            tau=data["tau"],
            n=int(meta[0]), k=int(meta[1]), lag_order=int(meta[2]),
            intercept=bool(meta[3]),
            beta=data["beta"], a=data["a"], w=data["w"],
            acceptance=acceptance,
            approximate_conditioning=bool(meta[4]),
            **kwargs,
        )


class _VectorScales:
    """Array of per-index Robbins-Monro scales sharing one target rate.

    Same update rule and clamps as ``adapt``, applied elementwise; used for
    the per-time mixing-variable blocks where individual dataclass scales
    would dominate the sweep cost.
    """

    def __init__(self, size: int, kappa0: float, target: float, decay: float):
        self.kappa = np.full(size, float(kappa0))
        self.target = target
        self.decay = decay
        self.iteration = 0
        self.frozen = False

    def update(self, accepts: np.ndarray) -> None:
        self.iteration += 1
        if self.frozen:
            return
        gamma_m = self.iteration ** (-self.decay)
        log_kappa = np.log(self.kappa) + gamma_m * (accepts.astype(float) - self.target)
        self.kappa = np.clip(np.exp(log_kappa), KAPPA_MIN, KAPPA_MAX)


class _AcceptCounter:
    def __init__(self):
        self.hits: dict[str, list[int]] = {}

    def record(self, name: str, accepted: bool) -> None:
        entry = self.hits.setdefault(name, [0, 0])
        entry[0] += int(accepted)
        entry[1] += 1

    def rates(self) -> dict[str, float]:
        return {name: hits / max(total, 1) for name, (hits, total) in self.hits.items()}


def _initial_beta(design: RegressionDesign) -> tuple[np.ndarray, np.ndarray]:
    """Per-equation least squares start; returns (beta, residuals)."""
    if design.k == 0:
        return np.zeros(0), design.y.copy()
    coef, *_ = np.linalg.lstsq(design.x, design.y, rcond=None)
    beta = coef.T.reshape(-1)
    resid = design.y - design.x @ coef
    return beta, resid


def _smoothed_log_variance(resid: np.ndarray, lam: float = 0.9) -> np.ndarray:
    """Two-sided exponentially weighted log squared residuals, for h starts."""
    e2 = np.clip(resid * resid, 1e-10, None)
    fwd = np.empty_like(e2)
    bwd = np.empty_like(e2)
    acc = e2[0]
    for t in range(e2.shape[0]):
        acc = lam * acc + (1.0 - lam) * e2[t]
        fwd[t] = acc
    acc = e2[-1]
    for t in range(e2.shape[0] - 1, -1, -1):
        acc = lam * acc + (1.0 - lam) * e2[t]
        bwd[t] = acc
    return np.clip(np.log(0.5 * (fwd + bwd)), -8.0, 8.0)


def fit_quantile_model(
    values: np.ndarray,
    spec: QuantileModelSpec,
    *,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> PosteriorDraws:
    """Run the Metropolis-within-Gibbs chain and return the kept draws."""
    if rng is None:
        rng = np.random.default_rng(seed)
    design = build_var_design(values, spec.lag_order, spec.intercept)
    n, k, t_len = design.n, design.k, design.t_len
    tau = spec.tau_vector(n)
    theta = theta_params(QuantileLevels(tau))
    priors = spec.priors
    settings = spec.mcmc

    beta, resid = _initial_beta(design)
    a = np.eye(n)
    w = np.ones(t_len)
    resid_var = np.clip(resid.var(axis=0, ddof=1) if t_len > 1 else np.ones(n), 1e-4, None)
    # the mixture noise at unit scale has variance theta1^2 + theta2^2, so the
    # scale level implied by the residuals is smaller by that factor; starting
    # there matters most for the SV regime, whose mean-zero log-variance paths
    # adjust their level only slowly
    mixture_var = theta.theta1**2 + theta.theta2**2
    scale0 = resid_var / mixture_var

    if spec.regime == VolRegime.CONST:
        vol: ConstVolState | SVVolState | GARCHVolState = ConstVolState(delta2=scale0.copy())
    elif spec.regime == VolRegime.SV:
        h0 = np.column_stack(
            [
                _smoothed_log_variance(resid[:, j]) - np.log(mixture_var[j])
                for j in range(n)
            ]
        )
        vol = SVVolState(h=h0, phi=np.full(n, 0.9), sigma2_h=np.full(n, 0.05))
    else:
        alpha0, gamma0 = np.full(n, 0.05), np.full(n, 0.85)
        omega0 = scale0 * (1.0 - alpha0 - gamma0)
        init = unconditional_variance(omega0, alpha0, gamma0)
        sig2 = garch_recursion(
            omega=omega0, alpha=alpha0, gamma=gamma0,
            y=design.y, locations=design.locations(beta),
            theta1=theta.theta1, w=w, sigma2_init=init,
        )
        vol = GARCHVolState(
            omega=omega0, alpha=alpha0, gamma=gamma0, sigma2=sig2, sigma2_init=init
        )

    state = MCMCState(beta=beta, a=a, w=w, vol=vol)
    counter = _AcceptCounter()

    def fresh_scale(kappa: float, target: float) -> AdaptiveScale:
        return AdaptiveScale(
            kappa=kappa, target_rate=target, decay_exponent=settings.decay_exponent
        )

    scales: dict[str, AdaptiveScale] = {}
    h_proposal_var = None
    beta_proposal_var = None
    if spec.regime == VolRegime.SV:
        stationary = vol.sigma2_h / (1.0 - vol.phi**2)
        h_proposal_var = [np.full(t_len, stationary[j]) for j in range(n)]
        for j in range(n):
            scales[f"h_path[{j}]"] = fresh_scale(2.38**2 / t_len, settings.target_rate_paths)
            scales[f"phi[{j}]"] = fresh_scale(0.25, settings.target_rate_statics)
    elif spec.regime == VolRegime.CONST:
        for j in range(n):
            scales[f"delta2[{j}]"] = fresh_scale(0.1, settings.target_rate_statics)
    w_scales: _VectorScales | None = None
    if spec.regime == VolRegime.GARCH:
        for j in range(n):
            scales[f"garch_statics[{j}]"] = fresh_scale(0.05, settings.target_rate_statics)
        w_scales = _VectorScales(
            t_len, 1.0, settings.target_rate_statics, settings.decay_exponent
        )
        scales["beta"] = fresh_scale(0.1, settings.target_rate_statics)
        beta_proposal_var = np.full(design.nk, 1.0 / max(t_len, 1))

    keep_every = settings.thin
    n_keep = settings.draws
    total = settings.burn_in + n_keep * keep_every

    kept_beta = np.empty((n_keep, design.nk))
    kept_a = np.empty((n_keep, n, n))
    kept_w = np.empty((n_keep, t_len))
    kept_vol: dict[str, np.ndarray] = {}
    if spec.regime == VolRegime.CONST:
        kept_vol["delta2"] = np.empty((n_keep, n))
    elif spec.regime == VolRegime.SV:
        kept_vol["h"] = np.empty((n_keep, t_len, n))
        kept_vol["phi"] = np.empty((n_keep, n))
        kept_vol["sigma2_h"] = np.empty((n_keep, n))
    else:
        for name in ("garch_omega", "garch_alpha", "garch_gamma"):
            kept_vol[name] = np.empty((n_keep, n))
        kept_vol["garch_sigma2"] = np.empty((n_keep, t_len, n))

    kept = 0
    for sweep in range(total):
        if settings.freeze_adaptation_after_burnin and sweep == settings.burn_in:
            scales = {
                name: dataclasses.replace(sc, frozen=True) for name, sc in scales.items()
            }
            if w_scales is not None:
                w_scales.frozen = True
        _one_sweep(
            state, design, theta, priors, spec.regime, scales, counter, rng,
            h_proposal_var=h_proposal_var,
            beta_proposal_var=beta_proposal_var,
            w_scales=w_scales,
            parallel_conditioning=settings.parallel_volatility_conditioning,
        )
        if sweep >= settings.burn_in and (sweep - settings.burn_in) % keep_every == 0:
            kept_beta[kept] = state.beta
            kept_a[kept] = state.a
            kept_w[kept] = state.w
            if spec.regime == VolRegime.CONST:
                kept_vol["delta2"][kept] = state.vol.delta2
            elif spec.regime == VolRegime.SV:
                kept_vol["h"][kept] = state.vol.h
                kept_vol["phi"][kept] = state.vol.phi
                kept_vol["sigma2_h"][kept] = state.vol.sigma2_h
            else:
                kept_vol["garch_omega"][kept] = state.vol.omega
                kept_vol["garch_alpha"][kept] = state.vol.alpha
                kept_vol["garch_gamma"][kept] = state.vol.gamma
                kept_vol["garch_sigma2"][kept] = state.vol.sigma2
            kept += 1
            if kept == n_keep:
                break

    return PosteriorDraws(
        regime=spec.regime.value,
        tau=tau,
        n=n, k=k, lag_order=spec.lag_order, intercept=spec.intercept,
        beta=kept_beta, a=kept_a, w=kept_w,
        acceptance=counter.rates(),
        approximate_conditioning=settings.parallel_volatility_conditioning,
        **kept_vol,
    )


def _one_sweep(
    state: MCMCState,
    design: RegressionDesign,
    theta: ThetaParams,
    priors: PriorSpec,
    regime: VolRegime,
    scales: dict[str, AdaptiveScale],
    counter: _AcceptCounter,
    rng: np.random.Generator,
    *,
    h_proposal_var,
    beta_proposal_var,
    w_scales: _VectorScales | None,
    parallel_conditioning: bool,
) -> None:
    n, t_len = design.n, design.t_len
    h_var = state.vol.variance_paths(t_len)

    if regime == VolRegime.GARCH:
        vol: GARCHVolState = state.vol
        state.beta, vol.sigma2, accepted = sample_beta_garch(
            design=design, beta=state.beta, theta=theta, a=state.a,
            omega=vol.omega, alpha=vol.alpha, gamma=vol.gamma,
            sigma2_init=vol.sigma2_init, w=state.w,
            prior_mean=priors.beta_mean, prior_cov=priors.beta_var,
            scale=scales["beta"], rng=rng, proposal_var=beta_proposal_var,
        )
        scales["beta"] = adapt(scales["beta"], accepted)
        counter.record("beta", accepted)
        h_var = vol.sigma2
    else:
        state.beta = sample_beta_gaussian(
            design=design, theta=theta, a=state.a, h=h_var, w=state.w,
            prior_mean=priors.beta_mean, prior_cov=priors.beta_var, rng=rng,
        )

    locations = design.locations(state.beta)

    if n > 1:
        state.a = sample_a_rows(
            y=design.y, locations=locations, theta=theta, h=h_var, w=state.w,
            prior_mean=priors.a_mean, prior_var=priors.a_var, rng=rng,
        )

    if regime == VolRegime.GARCH:
        vol = state.vol
        accepts = w_sweep_garch(
            y=design.y, locations=locations, theta=theta, a=state.a,
            omega=vol.omega, alpha=vol.alpha, gamma=vol.gamma,
            sigma2=vol.sigma2, w=state.w, kappas=w_scales.kappa, rng=rng,
        )
        w_scales.update(accepts)
        entry = counter.hits.setdefault("w", [0, 0])
        entry[0] += int(accepts.sum())
        entry[1] += accepts.shape[0]
        for j in range(n):
            name = f"garch_statics[{j}]"
            params_j = np.array([vol.omega[j], vol.alpha[j], vol.gamma[j]])
            new, path, accepted = sample_garch_statics(
                j=j, params_j=params_j, y=design.y, locations=locations,
                theta=theta, a=state.a, sigma2=vol.sigma2, w=state.w,
                prior_mean=np.asarray(priors.garch_log_mean),
                prior_var=np.asarray(priors.garch_log_var),
                scale=scales[name], rng=rng,
            )
            vol.omega[j], vol.alpha[j], vol.gamma[j] = new
            vol.sigma2[:, j] = path
            vol.sigma2_init[j] = new[0] / (1.0 - new[1] - new[2])
            scales[name] = adapt(scales[name], accepted)
            counter.record("garch_statics", accepted)
        return

    state.w = sample_w_all(
        y=design.y, locations=locations, theta=theta, a=state.a, h=h_var, rng=rng
    )

    if regime == VolRegime.CONST:
        vol: ConstVolState = state.vol
        for j in range(n):
            name = f"delta2[{j}]"
            new, accepted = sample_delta2_const(
                j=j, y=design.y, locations=locations, theta=theta, a=state.a,
                delta2=vol.delta2, w=state.w,
                prior_shape=priors.delta_shape, prior_rate=priors.delta_rate,
                scale=scales[name], rng=rng,
            )
            vol.delta2[j] = new
            scales[name] = adapt(scales[name], accepted)
            counter.record("delta2", accepted)
        return

    # SV regime
    vol: SVVolState = state.vol
    ybar = design.y - locations
    base_h = vol.h.copy() if parallel_conditioning else vol.h
    new_columns = []
    for j in range(n):
        name = f"h_path[{j}]"
        path, accepted, _ = sample_h_path(
            j=j, ybar=ybar, theta=theta, a=state.a, h=base_h, w=state.w,
            phi=vol.phi, sigma2_h=vol.sigma2_h,
            proposal_var=h_proposal_var[j], scale=scales[name], rng=rng,
        )
        if parallel_conditioning:
            new_columns.append(path)
        else:
            vol.h[:, j] = path
        scales[name] = adapt(scales[name], accepted)
        counter.record("h_path", accepted)
    if parallel_conditioning:
        for j, path in enumerate(new_columns):
            vol.h[:, j] = path
    for j in range(n):
        name = f"phi[{j}]"
        phi_j, accepted = sample_phi(
            phi_j=float(vol.phi[j]), h_j=vol.h[:, j],
            sigma2_h_j=float(vol.sigma2_h[j]),
            prior_a=priors.rho_a, prior_b=priors.rho_b,
            scale=scales[name], rng=rng,
        )
        vol.phi[j] = phi_j
        scales[name] = adapt(scales[name], accepted)
        counter.record("phi", accepted)
        vol.sigma2_h[j] = sample_sigma2_h(
            h_j=vol.h[:, j], phi_j=phi_j,
            prior_shape=priors.sigma_h_shape, prior_rate=priors.sigma_h_rate,
            rng=rng,
        )
