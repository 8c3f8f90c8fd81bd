"""Bayesian multivariate quantile regression with time-varying volatility.

Quantile VAR models estimated by Metropolis-within-Gibbs MCMC under constant,
stochastic-volatility, or GARCH(1,1) scale dynamics, with rolling-window
quantile forecasting, quantile-score evaluation, Diebold-Mariano testing, and
score-weighted model combination.
"""

from .core import (
    MCMCState,
    QuantileLevels,
    RegressionDesign,
    ScaleDecomposition,
    ThetaParams,
    build_var_design,
    implied_sigma,
    theta_params,
)
from .sampler import (
    MCMCSettings,
    PosteriorDraws,
    PriorSpec,
    QuantileModelSpec,
    VolRegime,
    fit_quantile_model,
)

__version__ = "0.1.0"

__all__ = [
    "MCMCState",
    "QuantileLevels",
    "RegressionDesign",
    "ScaleDecomposition",
    "ThetaParams",
    "build_var_design",
    "implied_sigma",
    "theta_params",
    "MCMCSettings",
    "PosteriorDraws",
    "PriorSpec",
    "QuantileModelSpec",
    "VolRegime",
    "fit_quantile_model",
    "__version__",
]
