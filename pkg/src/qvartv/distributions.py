"""Samplers and density oracles for the distributions the MCMC relies on.

All samplers draw from an injected numpy Generator, so runs are reproducible
given the seed and safe to parallelize with independent streams.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import ThetaParams

__all__ = [
    "GiGParams",
    "SkewTParams",
    "QuadratureError",
    "gig_sample",
    "gig_sample_many",
    "gig_logpdf",
    "mal_sample",
    "mal_logpdf_oracle",
    "skewt_sample",
    "truncated_garch_prior_sample",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge."""


@dataclass(frozen=True)
class GiGParams:
    """Parameters of the generalized inverse Gaussian law.

    Density proportional to x^(p-1) exp(-(a x + b / x) / 2) on (0, inf);
    existence requires (a>0 and b>0) or (p>0 and a>0) or (p<0 and b>0).
    """

    p: float
    a: float
    b: float

    def __post_init__(self):
        p, a, b = self.p, self.a, self.b
        if a < 0.0 or b < 0.0:
            raise ValueError("a and b must be non-negative")
        ok = (a > 0.0 and b > 0.0) or (p > 0.0 and a > 0.0) or (p < 0.0 and b > 0.0)
        if not ok:
            raise ValueError(f"GiG parameters outside the existence region: p={p}, a={a}, b={b}")


def _psi(x, alpha, lam):
    return -alpha * (np.cosh(x) - 1.0) - lam * (np.expm1(x) - x)


def _dpsi(x, alpha, lam):
    return -alpha * np.sinh(x) - lam * np.expm1(x)


def _gig_devroye(lam: float, omega: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Two-parameter GiG(lam, omega) draws, lam >= 0, omega > 0, vectorized.

    Rejection from a three-piece (uniform / two exponential tails) envelope of
    the log-concave density of log(x / mode).
    """
    omega = np.asarray(omega, dtype=float)
    alpha = np.sqrt(omega * omega + lam * lam) - lam

    with np.errstate(divide="ignore", over="ignore"):
        x = -_psi(1.0, alpha, lam)
        t = np.where(
            (x >= 0.5) & (x <= 2.0),
            1.0,
            np.where(x > 2.0, np.sqrt(2.0 / (alpha + lam)), np.log(4.0 / (alpha + 2.0 * lam))),
        )
        x = -_psi(-1.0, alpha, lam)
        log_term = np.log1p(1.0 / alpha + np.sqrt(1.0 / (alpha * alpha) + 2.0 / alpha))
        inv_lam = np.divide(1.0, lam) if lam > 0 else np.full_like(alpha, np.inf)
        s = np.where(
            (x >= 0.5) & (x <= 2.0),
            1.0,
            np.where(x > 2.0, np.sqrt(4.0 / (alpha * np.cosh(1.0) + lam)), np.minimum(inv_lam, log_term)),
        )

    eta = -_psi(t, alpha, lam)
    zeta = -_dpsi(t, alpha, lam)
    theta = -_psi(-s, alpha, lam)
    xi = _dpsi(-s, alpha, lam)
    p = 1.0 / xi
    r = 1.0 / zeta
    td = t - r * eta
    sd = s - p * theta
    q = td + sd

    out = np.empty_like(alpha)
    pending = np.ones(alpha.shape, dtype=bool)
    while np.any(pending):
        idx = np.flatnonzero(pending)
        u = rng.uniform(size=idx.size)
        v = rng.uniform(size=idx.size)
        wu = rng.uniform(size=idx.size)
        pi, ri, qi = p[idx], r[idx], q[idx]
        tdi, sdi, ti, si = td[idx], sd[idx], t[idx], s[idx]
        total = pi + qi + ri
        cand = np.where(
            u < qi / total,
            -sdi + qi * v,
            np.where(u < (qi + ri) / total, tdi - ri * np.log(v), -sdi + pi * np.log(v)),
        )
        f1 = np.exp(-eta[idx] - zeta[idx] * (cand - ti))
        f2 = np.exp(-theta[idx] + xi[idx] * (cand + si))
        envelope = np.where(
            (cand >= -sdi) & (cand <= tdi), 1.0, np.where(cand > tdi, f1, f2)
        )
        accept = wu * envelope <= np.exp(_psi(cand, alpha[idx], lam))
        taken = idx[accept]
        out[taken] = cand[accept]
        pending[taken] = False

    mode = lam / omega + np.sqrt(1.0 + (lam / omega) ** 2)
    return np.exp(out) * mode


def gig_sample_many(
    p: float, a: np.ndarray, b: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Vector of independent GiG(p, a_i, b_i) draws with a shared order p.

    Boundary cases collapse to gamma laws; half-integer orders use the
    inverse-Gaussian generator; the interior uses the rejection sampler.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape, dtype=float)

    zero_b = b == 0.0
    zero_a = a == 0.0
    if np.any(zero_b):
        if p <= 0.0:
            raise ValueError("b = 0 requires order p > 0")
        out[zero_b] = rng.gamma(p, 2.0 / a[zero_b])
    if np.any(zero_a):
        if p >= 0.0:
            raise ValueError("a = 0 requires order p < 0")
        out[zero_a] = 1.0 / rng.gamma(-p, 2.0 / b[zero_a])

    interior = ~(zero_a | zero_b)
    if np.any(interior):
        ai, bi = a[interior], b[interior]
        if p == -0.5:
            out[interior] = rng.wald(np.sqrt(bi / ai), bi)
        elif p == 0.5:
            out[interior] = 1.0 / rng.wald(np.sqrt(ai / bi), ai)
        else:
            omega = np.sqrt(ai * bi)
            draws = _gig_devroye(abs(p), omega, rng)
            if p < 0.0:
                draws = 1.0 / draws
            out[interior] = draws * np.sqrt(bi / ai)
    return out


def gig_sample(params: GiGParams, rng: np.random.Generator) -> float:
    """One draw from the generalized inverse Gaussian law."""
    return float(gig_sample_many(params.p, np.array([params.a]), np.array([params.b]), rng)[0])


def _gig_log_kernel(u, p, a, b):
    # kernel of the log-transformed variable u = log(x), including the
    # Jacobian; boundary parameters drop their term instead of producing 0*inf
    with np.errstate(over="ignore"):
        val = p * u
        if a > 0.0:
            val = val - 0.5 * a * np.exp(u)
        if b > 0.0:
            val = val - 0.5 * b * np.exp(-u)
    return val


def _gig_kernel_peak(p: float, a: float, b: float) -> float:
    if a > 0.0:
        x_star = (p + np.sqrt(p * p + a * b)) / a
    else:
        x_star = b / (2.0 * (-p))
    return float(np.log(x_star))


@functools.lru_cache(maxsize=512)
def _gig_log_kernel_integral(p: float, a: float, b: float) -> float:
    """log of integral_0^inf x^(p-1) exp(-(a x + b / x) / 2) dx by quadrature.

    Integrated in log coordinates standardized by the curvature at the kernel
    peak, so sharply concentrated kernels stay resolvable.
    """
    u_star = _gig_kernel_peak(p, a, b)
    peak = _gig_log_kernel(u_star, p, a, b)
    curvature = 0.5 * (a * np.exp(u_star) + b * np.exp(-u_star))
    width = 1.0 / np.sqrt(curvature)

    def integrand(v):
        return np.exp(_gig_log_kernel(u_star + width * v, p, a, b) - peak)

    value, abserr = integrate.quad(
        integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400
    )
    if not np.isfinite(value) or value <= 0.0 or abserr > 1e-8 * max(value, 1.0):
        raise QuadratureError(
            f"GiG kernel integral did not converge for p={p}, a={a}, b={b} "
            f"(value={value}, abserr={abserr})"
        )
    return peak + float(np.log(value)) + float(np.log(width))


def gig_logpdf(x: float | np.ndarray, params: GiGParams) -> float | np.ndarray:
    """Normalized log-density of the GiG law; normalization by quadrature."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("GiG support is the positive half-line")
    log_norm = _gig_log_kernel_integral(params.p, params.a, params.b)
    val = (params.p - 1.0) * np.log(x) - 0.5 * (params.a * x + params.b / x) - log_norm
    return float(val) if val.ndim == 0 else val


def _mixture_scale_factor(theta: ThetaParams, a: np.ndarray, h_t: np.ndarray) -> np.ndarray:
    """Matrix C with y = loc + sqrt(h) theta1 w + sqrt(w) C z; C = Theta2 A H^(1/2)."""
    return theta.theta2[:, None] * a * np.sqrt(h_t)[None, :]


def mal_sample(
    location: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h_t: np.ndarray,
    rng: np.random.Generator,
    *,
    size: int | None = None,
    w: np.ndarray | float | None = None,
) -> np.ndarray:
    """Draw from the asymmetric Laplace mixture with scale A diag(h_t) A'.

    y = location + H^(1/2) theta1 w + sqrt(w) Theta2 A H^(1/2) z with
    w ~ Exp(1) and z standard Gaussian. Pass ``w`` to condition on the mixing
    variable; ``size`` draws are stacked row-wise (None returns one vector).
    """
    location = np.asarray(location, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    n = theta.n
    if location.shape != (n,) or h_t.shape != (n,) or a.shape != (n, n):
        raise ValueError("location, h_t, and mixing matrix dimensions are inconsistent")
    m = 1 if size is None else int(size)
    if w is None:
        w_draws = rng.exponential(size=m)
    else:
        w_draws = np.broadcast_to(np.asarray(w, dtype=float), (m,)).copy()
    z = rng.standard_normal((m, n))
    c = _mixture_scale_factor(theta, a, h_t)
    shift = np.sqrt(h_t) * theta.theta1
    y = location[None, :] + w_draws[:, None] * shift[None, :] + np.sqrt(w_draws)[:, None] * (z @ c.T)
    return y[0] if size is None else y


def mal_logpdf_oracle(
    y: np.ndarray,
    location: np.ndarray,
    theta: ThetaParams,
    a: np.ndarray,
    h_t: np.ndarray,
) -> float:
    """Log-density of the mixture by integrating the conditional Gaussian over w.

    Test oracle only: the samplers never evaluate this. Conditioning on w the
    law is N(location + H^(1/2) theta1 w, w C C'), C = Theta2 A H^(1/2), and the
    Exp(1) mixture integral reduces to a 1-D quadrature.
    """
    y = np.asarray(y, dtype=float)
    location = np.asarray(location, dtype=float)
    h_t = np.asarray(h_t, dtype=float)
    n = theta.n
    c = _mixture_scale_factor(theta, a, h_t)
    sigma0 = c @ c.T
    chol = np.linalg.cholesky(sigma0)
    resid = y - location
    shift = np.sqrt(h_t) * theta.theta1
    r_w = np.linalg.solve(chol, resid)
    s_w = np.linalg.solve(chol, shift)
    q_yy = float(r_w @ r_w)
    q_ys = float(r_w @ s_w)
    q_ss = float(s_w @ s_w)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    # remaining integral over w is a GiG kernel with order 1 - n/2
    log_integral = _gig_log_kernel_integral(1.0 - n / 2.0, q_ss + 2.0, q_yy)
    return -0.5 * n * np.log(2.0 * np.pi) - 0.5 * log_det + q_ys + log_integral


@dataclass(frozen=True)
class SkewTParams:
    """Innovation law for the simulation study: skewed, fat-tailed, correlated.

    ``skew`` entries lie in (-1, 1) and tilt each margin; ``scale`` is the
    positive definite matrix of the Gaussian base. Built as a chi-square scale
    mixture of a skew-normal vector (shared |N(0,1)| skewing factor).
    """

    dof: float
    skew: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        if self.dof <= 2.0:
            raise ValueError("dof must exceed 2 so the variance exists")
        skew = np.atleast_1d(np.asarray(self.skew, dtype=float))
        if np.any(np.abs(skew) >= 1.0):
            raise ValueError("skew entries must lie strictly inside (-1, 1)")
        scale = np.asarray(self.scale, dtype=float)
        np.linalg.cholesky(scale)  # raises if not positive definite
        object.__setattr__(self, "skew", skew)
        object.__setattr__(self, "scale", scale)


def skewt_sample(
    params: SkewTParams, rng: np.random.Generator, *, size: int | None = None
) -> np.ndarray:
    """Draw from the skew-t law; with zero skew this is multivariate Student-t."""
    m = 1 if size is None else int(size)
    n = params.skew.shape[0]
    chol = np.linalg.cholesky(params.scale)
    base = rng.standard_normal((m, n)) @ chol.T
    u0 = np.abs(rng.standard_normal(m))
    z = params.skew[None, :] * u0[:, None] + np.sqrt(1.0 - params.skew**2)[None, :] * base
    v = rng.chisquare(params.dof, size=m) / params.dof
    y = z / np.sqrt(v)[:, None]
    return y[0] if size is None else y


def truncated_garch_prior_sample(
    mean: np.ndarray,
    variance: np.ndarray,
    rng: np.random.Generator,
    *,
    max_rejects: int = 10_000,
) -> tuple[float, float, float]:
    """Draw (omega, alpha, gamma) from the log-Gaussian prior with alpha+gamma < 1.

    ``mean`` and ``variance`` hold the Gaussian moments of
    (log omega, log alpha, log gamma); the stationarity region is enforced by
    rejection, failing loudly after ``max_rejects`` attempts.
    """
    mean = np.asarray(mean, dtype=float)
    variance = np.asarray(variance, dtype=float)
    if mean.shape != (3,) or variance.shape != (3,):
        raise ValueError("mean and variance must each have three entries")
    if np.any(variance <= 0.0):
        raise ValueError("prior variances must be strictly positive")
    sd = np.sqrt(variance)
    omega = float(np.exp(mean[0] + sd[0] * rng.standard_normal()))
    for _ in range(max_rejects):
        alpha = float(np.exp(mean[1] + sd[1] * rng.standard_normal()))
        gamma = float(np.exp(mean[2] + sd[2] * rng.standard_normal()))
        if alpha + gamma < 1.0:
            return omega, alpha, gamma
    raise RuntimeError(
        f"stationarity truncation rejected {max_rejects} consecutive draws; "
        "the prior mass on alpha + gamma < 1 is pathologically small"
    )
