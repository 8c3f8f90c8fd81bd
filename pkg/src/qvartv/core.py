"""Shared domain types for multivariate quantile regression with time-varying scale.

The model family works on an aligned sample of T observations of n series.
Coefficients are stored equation-major: ``beta = B.reshape(-1)`` where row j of
the (n, k) matrix B holds the k regression coefficients of equation j, matching
the block-diagonal per-time design ``X_t = I_n (x) x_t'``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QuantileLevels",
    "ThetaParams",
    "RegressionDesign",
    "ScaleDecomposition",
    "ConstVolState",
    "SVVolState",
    "GARCHVolState",
    "MCMCState",
    "theta_params",
    "tau_from_theta1",
    "build_var_design",
    "implied_sigma",
]


@dataclass(frozen=True)
class QuantileLevels:
    """Per-series quantile levels, each strictly inside (0, 1)."""

    tau: np.ndarray

    def __post_init__(self):
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        if tau.ndim != 1:
            raise ValueError("tau must be a 1-D vector")
        if np.any(~np.isfinite(tau)) or np.any(tau <= 0.0) or np.any(tau >= 1.0):
            raise ValueError("every quantile level must lie strictly inside (0, 1)")
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.tau.shape[0]


@dataclass(frozen=True)
class ThetaParams:
    """Skew/scale constants that pin the location to the requested quantiles.

    theta1 is antisymmetric and theta2 symmetric around the median:
    theta1(tau) = -theta1(1-tau), theta2(tau) = theta2(1-tau).
    """

    theta1: np.ndarray
    theta2: np.ndarray

    @property
    def n(self) -> int:
        return self.theta1.shape[0]


def theta_params(levels: QuantileLevels) -> ThetaParams:
    """Map quantile levels to the (theta1, theta2) pair of the constrained law.

    theta1 = (1 - 2 tau) / (tau (1 - tau)) and theta2 = sqrt(2 / (tau (1 - tau))).
    """
    tau = levels.tau
    denom = tau * (1.0 - tau)
    theta1 = (1.0 - 2.0 * tau) / denom
    theta2 = np.sqrt(2.0 / denom)
    return ThetaParams(theta1=theta1, theta2=theta2)


def tau_from_theta1(theta1: np.ndarray) -> np.ndarray:
    """Invert theta1 back to the quantile level via its defining quadratic.

    theta1 * tau^2 - (theta1 + 2) * tau + 1 = 0; the root inside (0, 1) is
    returned. theta1 = 0 maps to the median.
    """
    t1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    out = np.empty_like(t1)
    for i, v in enumerate(t1):
        if v == 0.0:
            out[i] = 0.5
            continue
        disc = np.sqrt((v + 2.0) ** 2 - 4.0 * v)
        roots = ((v + 2.0) - disc) / (2.0 * v), ((v + 2.0) + disc) / (2.0 * v)
        inside = [r for r in roots if 0.0 < r < 1.0]
        if not inside:
            raise ValueError(f"theta1={v} has no quantile level in (0, 1)")
        out[i] = inside[0]
    return out


@dataclass(frozen=True)
class RegressionDesign:
    """Aligned (y_t, x_t) pairs after consuming lag_order leading rows.

    ``x`` stacks the common regressor row x_t' (intercept first when enabled,
    then lags y_{t-1}, ..., y_{t-p}); the per-time design is X_t = I_n (x) x_t'
    and is materialized only on demand.
    """

    y: np.ndarray  # (T, n)
    x: np.ndarray  # (T, k)
    k: int
    n: int
    includes_intercept: bool
    lag_order: int

    @property
    def t_len(self) -> int:
        return self.y.shape[0]

    @property
    def nk(self) -> int:
        return self.n * self.k

    def design_matrix(self, t: int) -> np.ndarray:
        """Materialize X_t = I_n (x) x_t' of shape (n, n*k)."""
        return np.kron(np.eye(self.n), self.x[t])

    def locations(self, beta: np.ndarray) -> np.ndarray:
        """All fitted locations X_t beta as a (T, n) array."""
        b_mat = np.asarray(beta, dtype=float).reshape(self.n, self.k)
        return self.x @ b_mat.T


def build_var_design(values: np.ndarray, lag_order: int, intercept: bool = True) -> RegressionDesign:
    """Build the quantile-VAR design with ``lag_order`` own lags per equation.

    ``values`` is the (T_raw, n) observation matrix; the first lag_order rows
    are consumed as initial conditions, leaving T_raw - lag_order usable pairs.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.ndim != 2:
        raise ValueError("values must be a (T, n) matrix")
    if not np.all(np.isfinite(values)):
        raise ValueError("values contain non-finite entries")
    if lag_order < 0:
        raise ValueError("lag_order must be non-negative")
    t_raw, n = values.shape
    if t_raw < lag_order + 2:
        raise ValueError(f"need at least lag_order + 2 = {lag_order + 2} rows, got {t_raw}")

    y = values[lag_order:]
    cols = []
    if intercept:
        cols.append(np.ones((t_raw - lag_order, 1)))
    for lag in range(1, lag_order + 1):
        cols.append(values[lag_order - lag : t_raw - lag])
    if cols:
        x = np.hstack(cols)
    else:
        x = np.empty((t_raw - lag_order, 0))
    return RegressionDesign(
        y=y,
        x=x,
        k=x.shape[1],
        n=n,
        includes_intercept=intercept,
        lag_order=lag_order,
    )


def _check_unit_lower_triangular(a: np.ndarray) -> None:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("mixing matrix must be square")
    if not np.allclose(np.diag(a), 1.0, rtol=0.0, atol=0.0):
        raise ValueError("mixing matrix must have exact unit diagonal")
    if np.any(np.triu(a, k=1) != 0.0):
        raise ValueError("mixing matrix must be lower triangular")


@dataclass(frozen=True)
class ScaleDecomposition:
    """Triangular scale factorization Sigma_t = A diag(H_t) A'.

    ``a`` is unit lower triangular; ``h`` holds the per-time positive diagonal
    variances, shape (T, n) (a single (n,) row is accepted for static scales).
    """

    a: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        _check_unit_lower_triangular(a)
        if h.shape[1] != a.shape[0]:
            raise ValueError("h row length must match the mixing matrix size")
        if np.any(h <= 0.0) or np.any(~np.isfinite(h)):
            raise ValueError("all variance entries must be strictly positive and finite")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.a.shape[0]


def implied_sigma(dec: ScaleDecomposition, t: int = 0) -> np.ndarray:
    """Scale matrix A diag(H_t) A' at time t; symmetric positive definite."""
    return dec.a @ np.diag(dec.h[t]) @ dec.a.T


@dataclass
class ConstVolState:
    """Static per-series variances delta_j^2 (homoskedastic benchmark)."""

    delta2: np.ndarray

    def variance_paths(self, t_len: int) -> np.ndarray:
        return np.broadcast_to(self.delta2, (t_len, self.delta2.shape[0])).copy()

    def validate(self) -> None:
        if np.any(self.delta2 <= 0.0) or np.any(~np.isfinite(self.delta2)):
            raise ValueError("delta2 entries must be strictly positive")


@dataclass
class SVVolState:
    """Latent log-variance paths with stationary AR(1) dynamics per series."""

    h: np.ndarray         # (T, n) log variances
    phi: np.ndarray       # (n,), |phi_j| < 1
    sigma2_h: np.ndarray  # (n,), innovation variances > 0

    def variance_paths(self, t_len: int | None = None) -> np.ndarray:
        return np.exp(self.h)

    def validate(self) -> None:
        if np.any(np.abs(self.phi) >= 1.0):
            raise ValueError("persistence must satisfy |phi_j| < 1")
        if np.any(self.sigma2_h <= 0.0):
            raise ValueError("log-variance innovation variances must be positive")
        if np.any(~np.isfinite(self.h)):
            raise ValueError("log-variance paths contain non-finite values")


@dataclass
class GARCHVolState:
    """Observation-driven variance recursions with stationarity constraints."""

    omega: np.ndarray   # (n,) > 0
    alpha: np.ndarray   # (n,) >= 0
    gamma: np.ndarray   # (n,) >= 0, alpha + gamma < 1
    sigma2: np.ndarray  # (T, n) variance paths
    sigma2_init: np.ndarray  # (n,) initial variances

    def variance_paths(self, t_len: int | None = None) -> np.ndarray:
        return self.sigma2

    def validate(self) -> None:
        if np.any(self.omega <= 0.0):
            raise ValueError("omega entries must be strictly positive")
        if np.any(self.alpha < 0.0) or np.any(self.gamma < 0.0):
            raise ValueError("alpha and gamma entries must be non-negative")
        if np.any(self.alpha + self.gamma >= 1.0):
            raise ValueError("stationarity requires alpha + gamma < 1")
        if np.any(self.sigma2 <= 0.0) or np.any(~np.isfinite(self.sigma2)):
            raise ValueError("variance paths must be strictly positive")


@dataclass
class MCMCState:
    """One full parameter configuration of a fitted quantile model.

    Mutated only by the owning chain; ``validate`` is a pure predicate usable
    after every sweep.
    """

    beta: np.ndarray
    a: np.ndarray
    w: np.ndarray
    vol: ConstVolState | SVVolState | GARCHVolState
    adapt: dict = field(default_factory=dict)

    def a_free_rows(self) -> list[np.ndarray]:
        """Free lower-triangle entries of A, row by row (rows 2..n)."""
        return [self.a[j, :j].copy() for j in range(1, self.a.shape[0])]

    def validate(self) -> None:
        _check_unit_lower_triangular(self.a)
        if np.any(self.w <= 0.0) or np.any(~np.isfinite(self.w)):
            raise ValueError("all mixing variables w_t must be strictly positive")
        if np.any(~np.isfinite(self.beta)):
            raise ValueError("beta contains non-finite values")
        self.vol.validate()
