"""Rolling-window quantile forecasting from posterior draws.

The fitted location is the conditional quantile, so the point forecast is the
posterior mean of X_{t+h} beta. One step ahead this is available in closed
form per draw; at longer horizons the intermediate observations are simulated
recursively from the fitted mixture law with the volatility propagated under
the model's own dynamics.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import QuantileLevels, theta_params
from .data_io import TimeSeriesPanel, standardize
from .sampler import PosteriorDraws, QuantileModelSpec, fit_quantile_model

__all__ = [
    "BacktestPlan",
    "ForecastRecord",
    "default_quantile_grid",
    "forecast_one_step",
    "forecast_multi_step",
    "run_backtest",
    "records_to_csv",
    "records_from_csv",
    "count_crossings",
    "rearrange_monotone",
]

RECORD_COLUMNS = ("origin_date", "horizon", "tau", "variable", "model_id", "q_hat_std", "q_hat_raw")
_PATH_CLAMP = 1e8
_BACKTEST_TAG = 0xB1


def default_quantile_grid(levels: int = 17, low: float = 0.1, high: float = 0.9) -> tuple[float, ...]:
    """Equally spaced quantile grid; the default is 17 levels on [0.1, 0.9]."""
    return tuple(float(v) for v in np.linspace(low, high, levels))


@dataclass(frozen=True)
class BacktestPlan:
    """Rolling-window forecasting exercise layout."""

    window_length: int = 261
    horizons: tuple[int, ...] = (1, 5)
    step: int = 1
    quantile_grid: tuple[float, ...] = field(default_factory=default_quantile_grid)
    n_paths: int = 100  # simulated paths per posterior draw at h >= 2

    def __post_init__(self):
        if any(h < 1 for h in self.horizons):
            raise ValueError("horizons must be >= 1")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if any(not 0.0 < q < 1.0 for q in self.quantile_grid):
            raise ValueError("quantile grid levels must lie in (0, 1)")


@dataclass(frozen=True)
class ForecastRecord:
    """One predicted quantile: the atom of evaluation and combination."""

    origin_date: str
    horizon: int
    tau: float
    variable: int
    model_id: str
    q_hat_std: float
    q_hat_raw: float


def _x_next(history: np.ndarray, lag_order: int, intercept: bool) -> np.ndarray:
    """Regressor row for the next period: intercept then lags, newest first."""
    parts = [np.ones(1)] if intercept else []
    for lag in range(1, lag_order + 1):
        parts.append(history[-lag])
    return np.concatenate(parts) if parts else np.empty(0)


def forecast_one_step(draws: PosteriorDraws, x_next: np.ndarray) -> np.ndarray:
    """Posterior-mean conditional quantile one step ahead, per variable."""
    x_next = np.asarray(x_next, dtype=float)
    if x_next.shape != (draws.k,):
        raise ValueError(f"x_next has shape {x_next.shape}, expected ({draws.k},)")
    b = draws.beta.reshape(draws.n_draws, draws.n, draws.k)
    return (b @ x_next).mean(axis=0)


def _advance_volatility(
    draws: PosteriorDraws, d: int, vol_state: dict, rng: np.random.Generator
) -> np.ndarray:
    """One-step update of the per-series variances for one simulated path."""
    if draws.regime == "sv":
        h_new = vol_state["phi"] * vol_state["h"] + np.sqrt(vol_state["s2h"]) * rng.standard_normal(draws.n)
        vol_state["h"] = h_new
        return np.exp(h_new)
    if draws.regime == "garch":
        resid = vol_state["y_prev"] - vol_state["loc_prev"] - vol_state["w_prev"] * vol_state["theta1"] * np.sqrt(vol_state["sig2"])
        sig2 = vol_state["omega"] + vol_state["alpha"] * resid**2 + vol_state["gamma"] * vol_state["sig2"]
        vol_state["sig2"] = sig2
        return sig2
    return vol_state["delta2"]


def forecast_multi_step(
    draws: PosteriorDraws,
    history: np.ndarray,
    horizon: int,
    rng: np.random.Generator,
    *,
    n_paths: int = 100,
) -> np.ndarray:
    """Iterated h-step forecast: simulate intermediate observations, then
    evaluate the conditional quantile at the target date.

    ``history`` holds the most recent in-sample observations (rows, oldest
    first; at least lag_order of them). Exploding simulated paths are trimmed
    from the average with a warning.
    """
    history = np.atleast_2d(np.asarray(history, dtype=float))
    if horizon == 1 or draws.lag_order == 0:
        return forecast_one_step(draws, _x_next(history, draws.lag_order, draws.intercept))

    theta = theta_params(QuantileLevels(draws.tau))
    totals = np.zeros(draws.n)
    kept = 0
    trimmed = 0
    for d in range(draws.n_draws):
        b = draws.beta[d].reshape(draws.n, draws.k)
        a = draws.a[d]
        for _ in range(n_paths):
            buf = history.copy()
            vol_state = _fresh_vol_state(draws, d, buf)
            ok = True
            for step in range(1, horizon):
                x_row = _x_next(buf, draws.lag_order, draws.intercept)
                loc = b @ x_row
                h_t = _advance_volatility(draws, d, vol_state, rng)
                w_t = rng.exponential()
                z = rng.standard_normal(draws.n)
                shock = np.sqrt(h_t) * theta.theta1 * w_t
                mix = np.sqrt(w_t) * (theta.theta2 * (a @ (np.sqrt(h_t) * z)))
                y_new = loc + shock + mix
                if np.any(np.abs(y_new) > _PATH_CLAMP):
                    ok = False
                    break
                if draws.regime == "garch":
                    vol_state["y_prev"] = y_new
                    vol_state["loc_prev"] = loc
                    vol_state["w_prev"] = w_t
                buf = np.vstack([buf, y_new])[-max(draws.lag_order, 1):]
            if not ok:
                trimmed += 1
                continue
            x_row = _x_next(buf, draws.lag_order, draws.intercept)
            totals += b @ x_row
            kept += 1
    if trimmed:
        warnings.warn(
            f"trimmed {trimmed} exploding simulated paths out of {trimmed + kept}",
            RuntimeWarning,
            stacklevel=2,
        )
    if kept == 0:
        raise RuntimeError("all simulated paths exploded; model state is unusable")
    return totals / kept


def _fresh_vol_state(draws: PosteriorDraws, d: int, history: np.ndarray) -> dict:
    if draws.regime == "sv":
        return {
            "h": draws.h[d, -1].copy(),
            "phi": draws.phi[d],
            "s2h": draws.sigma2_h[d],
        }
    if draws.regime == "garch":
        if history.shape[0] < draws.lag_order + 1:
            raise ValueError("GARCH multi-step forecasts need lag_order + 1 history rows")
        b = draws.beta[d].reshape(draws.n, draws.k)
        # location at the final in-sample time, for the first recursion step
        loc_prev = b @ _x_next(history[:-1], draws.lag_order, draws.intercept)
        return {
            "omega": draws.garch_omega[d],
            "alpha": draws.garch_alpha[d],
            "gamma": draws.garch_gamma[d],
            "sig2": draws.garch_sigma2[d, -1].copy(),
            "theta1": theta_params(QuantileLevels(draws.tau)).theta1,
            "y_prev": history[-1].copy(),
            "loc_prev": loc_prev,
            "w_prev": float(draws.w[d, -1]),
        }
    return {"delta2": draws.delta2[d]}


def _derived_rng(master_seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, key)]))


def _spec_digest(spec: QuantileModelSpec) -> int:
    """Stable integer fingerprint of a model spec; identical specs share
    fit seeds, so duplicated model entries yield identical records."""
    import hashlib

    blob = repr(dataclasses.asdict(spec)).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big")


def run_backtest(
    panel: TimeSeriesPanel,
    plan: BacktestPlan,
    model_specs: dict[str, QuantileModelSpec],
    *,
    master_seed: int,
    checkpoint_dir: str | Path | None = None,
    n_workers: int = 1,
) -> list[ForecastRecord]:
    """Rolling-window backtest over every (origin, model, tau, horizon) cell.

    Each origin re-standardizes its window, runs the full MCMC per model and
    quantile level, and de-standardizes the forecasts back to panel units.
    Origins use independently derived seeds, so results are reproducible and
    origin-parallel; a failed fit skips the whole origin with a warning
    rather than interpolating.
    """
    max_h = max(plan.horizons)
    for model_id, spec in model_specs.items():
        if plan.window_length < spec.lag_order + 10:
            raise ValueError(
                f"window_length {plan.window_length} too short for model "
                f"'{model_id}' with lag_order {spec.lag_order}"
            )
    last_origin = panel.t_len - plan.window_length - max_h
    if last_origin < 0:
        raise ValueError(
            f"panel too short: need at least window_length + max horizon = "
            f"{plan.window_length + max_h} rows, got {panel.t_len}"
        )
    origin_rows = list(range(0, last_origin + 1, plan.step))
    model_ids = sorted(model_specs)

    done_origins: set[int] = set()
    checkpoint_file = None
    records: list[ForecastRecord] = []
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_file = checkpoint_dir / "backtest_checkpoint.json"
        partial_file = checkpoint_dir / "backtest_records_partial.csv"
        if checkpoint_file.exists():
            state = json.loads(checkpoint_file.read_text())
            done_origins = set(state.get("done_origins", []))
            if partial_file.exists():
                records = records_from_csv(partial_file)

    pending = [o for o in origin_rows if o not in done_origins]

    def run_origin(origin_row: int) -> list[ForecastRecord] | None:
        return _run_one_origin(panel, plan, model_specs, model_ids, origin_row, master_seed)

    if n_workers > 1 and len(pending) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(
                pool.map(
                    _origin_worker,
                    [
                        (panel, plan, model_specs, model_ids, o, master_seed)
                        for o in pending
                    ],
                )
            )
        batches = dict(zip(pending, results))
    else:
        batches = {o: run_origin(o) for o in pending}

    for origin_row in pending:
        batch = batches[origin_row]
        if batch is None:
            warnings.warn(
                f"skipped origin row {origin_row}: MCMC failed", RuntimeWarning, stacklevel=2
            )
        else:
            records.extend(batch)
        done_origins.add(origin_row)
        if checkpoint_file is not None:
            records_to_csv(records, checkpoint_dir / "backtest_records_partial.csv")
            checkpoint_file.write_text(json.dumps({"done_origins": sorted(done_origins)}))

    records.sort(key=lambda r: (r.origin_date, r.horizon, r.model_id, r.tau, r.variable))
    return records


def _origin_worker(args) -> list[ForecastRecord] | None:
    return _run_one_origin(*args)


def _run_one_origin(
    panel: TimeSeriesPanel,
    plan: BacktestPlan,
    model_specs: dict[str, QuantileModelSpec],
    model_ids: list[str],
    origin_row: int,
    master_seed: int,
) -> list[ForecastRecord] | None:
    window = panel.values[origin_row : origin_row + plan.window_length]
    origin_date = panel.dates[origin_row + plan.window_length - 1]
    window_panel = TimeSeriesPanel(
        dates=panel.dates[origin_row : origin_row + plan.window_length],
        values=window,
        names=panel.names,
    )
    std_panel, constants = standardize(window_panel)
    out: list[ForecastRecord] = []
    for model_id in model_ids:
        base_spec = model_specs[model_id]
        for q_idx, tau in enumerate(plan.quantile_grid):
            spec = dataclasses.replace(base_spec, tau=tau)
            rng = _derived_rng(master_seed, _BACKTEST_TAG, origin_row, _spec_digest(spec), q_idx)
            try:
                draws = fit_quantile_model(std_panel.values, spec, rng=rng)
            except (RuntimeError, OverflowError, np.linalg.LinAlgError):
                return None
            history = std_panel.values[-(spec.lag_order + 1):]
            for horizon in sorted(plan.horizons):
                q_std = forecast_multi_step(
                    draws, history, horizon, rng, n_paths=plan.n_paths
                )
                q_raw = q_std * constants["sd"] + constants["mean"]
                for var in range(panel.n):
                    out.append(
                        ForecastRecord(
                            origin_date=origin_date,
                            horizon=horizon,
                            tau=float(tau),
                            variable=var,
                            model_id=model_id,
                            q_hat_std=float(q_std[var]),
                            q_hat_raw=float(q_raw[var]),
                        )
                    )
    return out


def records_to_csv(records: list[ForecastRecord], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            # shortest round-trip float form: checkpoint resume reloads these
            # values and must reproduce the in-memory records exactly
            writer.writerow(
                [
                    rec.origin_date,
                    rec.horizon,
                    repr(float(rec.tau)),
                    rec.variable,
                    rec.model_id,
                    repr(float(rec.q_hat_std)),
                    repr(float(rec.q_hat_raw)),
                ]
            )


def records_from_csv(path) -> list[ForecastRecord]:
    path = Path(path)
    out = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = set(RECORD_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(
                ForecastRecord(
                    origin_date=row["origin_date"],
                    horizon=int(row["horizon"]),
                    tau=float(row["tau"]),
                    variable=int(row["variable"]),
                    model_id=row["model_id"],
                    q_hat_std=float(row["q_hat_std"]),
                    q_hat_raw=float(row["q_hat_raw"]),
                )
            )
    return out


def _group_by_cell(records: list[ForecastRecord]):
    cells: dict[tuple, list[ForecastRecord]] = {}
    for rec in records:
        cells.setdefault((rec.origin_date, rec.horizon, rec.variable, rec.model_id), []).append(rec)
    return cells


def count_crossings(records: list[ForecastRecord]) -> int:
    """Quantile crossings: adjacent grid levels whose forecasts are out of order."""
    crossings = 0
    for cell in _group_by_cell(records).values():
        cell.sort(key=lambda r: r.tau)
        values = [r.q_hat_std for r in cell]
        crossings += sum(1 for lo, hi in zip(values, values[1:]) if hi < lo)
    return crossings


def rearrange_monotone(records: list[ForecastRecord]) -> list[ForecastRecord]:
    """Sort each cell's forecasts to be non-decreasing across the quantile grid.

    Opt-in repair; the raw records are the default output.
    """
    out = []
    for cell in _group_by_cell(records).values():
        cell.sort(key=lambda r: r.tau)
        std_sorted = sorted(r.q_hat_std for r in cell)
        raw_sorted = sorted(r.q_hat_raw for r in cell)
        for rec, q_std, q_raw in zip(cell, std_sorted, raw_sorted):
            out.append(dataclasses.replace(rec, q_hat_std=q_std, q_hat_raw=q_raw))
    out.sort(key=lambda r: (r.origin_date, r.horizon, r.model_id, r.tau, r.variable))
    return out
