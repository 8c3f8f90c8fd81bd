"""Plain-text configuration: INI sections of key = value pairs.

Grammar: standard configparser syntax; section names and keys are lower case;
lists are comma separated; booleans are true/false. Every key can be
overridden by an environment variable QVARTV_<SECTION>__<KEY> (upper case),
e.g. QVARTV_MCMC__DRAWS=200. Defaults: window 261, a 17-level quantile grid,
acceptance targets 0.27 and 0.30; chain lengths default to 5000 + 5000, a
desk-scale choice.
"""

from __future__ import annotations

import configparser
import os
from pathlib import Path

from .forecast import BacktestPlan, default_quantile_grid
from .sampler import MCMCSettings, PriorSpec, QuantileModelSpec, VolRegime
from .simstudy import DGPConfig, SimulationStudyConfig

__all__ = ["ConfigError", "load_config", "Config"]

ENV_PREFIX = "QVARTV_"

REGIME_BY_MODEL_ID = {
    "qvar": VolRegime.CONST,
    "qvar-sv": VolRegime.SV,
    "qvar-garch": VolRegime.GARCH,
}


class ConfigError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


class Config:
    """Typed access over parsed sections with environment overrides."""

    def __init__(self, parser: configparser.ConfigParser):
        self._parser = parser

    @classmethod
    def empty(cls) -> "Config":
        return cls(configparser.ConfigParser())

    def _raw(self, section: str, key: str, default):
        env_key = f"{ENV_PREFIX}{section.upper()}__{key.upper()}"
        if env_key in os.environ:
            return os.environ[env_key]
        if self._parser.has_option(section, key):
            return self._parser.get(section, key)
        return default

    def get_str(self, section: str, key: str, default: str | None = None) -> str | None:
        value = self._raw(section, key, default)
        return None if value is None else str(value)

    def get_int(self, section: str, key: str, default: int) -> int:
        value = self._raw(section, key, default)
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}") from None

    def get_float(self, section: str, key: str, default: float) -> float:
        value = self._raw(section, key, default)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"[{section}] {key} must be a number, got {value!r}") from None

    def get_bool(self, section: str, key: str, default: bool) -> bool:
        value = self._raw(section, key, default)
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("true", "1", "yes", "on"):
            return True
        if text in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key} must be true/false, got {value!r}")

    def get_floats(self, section: str, key: str, default: tuple[float, ...]) -> tuple[float, ...]:
        value = self._raw(section, key, None)
        if value is None:
            return default
        try:
            return tuple(float(part) for part in str(value).split(",") if part.strip())
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a comma list of numbers") from None

    def get_ints(self, section: str, key: str, default: tuple[int, ...]) -> tuple[int, ...]:
        value = self._raw(section, key, None)
        if value is None:
            return default
        try:
            return tuple(int(part) for part in str(value).split(",") if part.strip())
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a comma list of integers") from None

    def get_strs(self, section: str, key: str, default: tuple[str, ...]) -> tuple[str, ...]:
        value = self._raw(section, key, None)
        if value is None:
            return default
        return tuple(part.strip() for part in str(value).split(",") if part.strip())

    # --- assembled objects -------------------------------------------------

    def mcmc_settings(self) -> MCMCSettings:
        return MCMCSettings(
            draws=self.get_int("mcmc", "draws", 5000),
            burn_in=self.get_int("mcmc", "burn_in", 5000),
            thin=self.get_int("mcmc", "thin", 1),
            target_rate_paths=self.get_float("mcmc", "target_rate_paths", 0.27),
            target_rate_statics=self.get_float("mcmc", "target_rate_statics", 0.30),
            decay_exponent=self.get_float("mcmc", "decay_exponent", 0.6),
            freeze_adaptation_after_burnin=self.get_bool("mcmc", "freeze_adaptation", True),
            parallel_volatility_conditioning=self.get_bool("mcmc", "parallel_volatility", False),
        )

    def priors(self) -> PriorSpec:
        defaults = PriorSpec()
        return PriorSpec(
            beta_mean=self.get_float("priors", "beta_mean", defaults.beta_mean),
            beta_var=self.get_float("priors", "beta_var", defaults.beta_var),
            a_mean=self.get_float("priors", "a_mean", defaults.a_mean),
            a_var=self.get_float("priors", "a_var", defaults.a_var),
            rho_a=self.get_float("priors", "rho_a", defaults.rho_a),
            rho_b=self.get_float("priors", "rho_b", defaults.rho_b),
            sigma_h_shape=self.get_float("priors", "sigma_h_shape", defaults.sigma_h_shape),
            sigma_h_rate=self.get_float("priors", "sigma_h_rate", defaults.sigma_h_rate),
            delta_shape=self.get_float("priors", "delta_shape", defaults.delta_shape),
            delta_rate=self.get_float("priors", "delta_rate", defaults.delta_rate),
            garch_log_mean=self.get_floats("priors", "garch_log_mean", defaults.garch_log_mean),
            garch_log_var=self.get_floats("priors", "garch_log_var", defaults.garch_log_var),
        )

    def model_spec(self, model_id: str, tau) -> QuantileModelSpec:
        if model_id not in REGIME_BY_MODEL_ID:
            raise ConfigError(
                f"unknown model id {model_id!r}; expected one of {sorted(REGIME_BY_MODEL_ID)}"
            )
        return QuantileModelSpec(
            tau=tau,
            lag_order=self.get_int("model", "lag_order", 1),
            intercept=self.get_bool("model", "intercept", True),
            regime=REGIME_BY_MODEL_ID[model_id],
            priors=self.priors(),
            mcmc=self.mcmc_settings(),
        )

    def quantile_grid(self, section: str = "backtest") -> tuple[float, ...]:
        explicit = self._raw(section, "quantile_grid", None)
        if explicit is None:
            count = self.get_int(section, "quantile_grid_size", 17)
            low = self.get_float(section, "quantile_grid_low", 0.1)
            high = self.get_float(section, "quantile_grid_high", 0.9)
            return default_quantile_grid(count, low, high)
        return self.get_floats(section, "quantile_grid", default_quantile_grid())

    def backtest_plan(self) -> BacktestPlan:
        return BacktestPlan(
            window_length=self.get_int("backtest", "window_length", 261),
            horizons=self.get_ints("backtest", "horizons", (1, 5)),
            step=self.get_int("backtest", "step", 1),
            quantile_grid=self.quantile_grid("backtest"),
            n_paths=self.get_int("backtest", "n_paths", 100),
        )

    def dgp(self) -> DGPConfig:
        d = DGPConfig()
        return DGPConfig(
            spectral_radius=self.get_float("simulate", "spectral_radius", d.spectral_radius),
            sv_phi=self.get_float("simulate", "sv_phi", d.sv_phi),
            sv_sigma2=self.get_float("simulate", "sv_sigma2", d.sv_sigma2),
            skew=self.get_float("simulate", "skew", d.skew),
            dof=self.get_float("simulate", "dof", d.dof),
        )

    def study(self) -> SimulationStudyConfig:
        d = SimulationStudyConfig()
        return SimulationStudyConfig(
            n=self.get_int("study", "n", d.n),
            t_len=self.get_int("study", "t_len", d.t_len),
            replications=self.get_int("study", "replications", d.replications),
            quantiles=self.get_floats("study", "quantiles", d.quantiles),
            models=self.get_strs("study", "models", d.models),
            benchmark=self.get_str("study", "benchmark", d.benchmark),
            dgp=self.dgp(),
            draws=self.get_int("study", "draws", d.draws),
            burn_in=self.get_int("study", "burn_in", d.burn_in),
        )


def load_config(path) -> Config:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with path.open(encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return Config(parser)
