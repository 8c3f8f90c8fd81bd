"""Quantile-score evaluation, model combination, and predictive-accuracy tests.

The quantile score is the pinball loss (y - Qhat) * (tau - 1{y <= Qhat}) with
the at-or-below indicator convention; lower is better. Combination weights are
proportional to inverse cumulative scores, either time-varying or averaged
over the evaluation window. Model comparisons use one-sided Diebold-Mariano
tests with a Bartlett long-run variance at truncation lag h - 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .data_io import TimeSeriesPanel
from .forecast import ForecastRecord

__all__ = [
    "quantile_score",
    "tv_weights",
    "tv_weight_series",
    "avg_weights",
    "combine_forecasts",
    "DMResult",
    "diebold_mariano",
    "score_table",
    "combined_records",
    "render_score_table",
    "score_table_to_csv",
]

QS_FLOOR = 1e-12


def quantile_score(y: np.ndarray, q_hat: np.ndarray, tau: float) -> np.ndarray:
    """Elementwise pinball loss (y - q) * (tau - 1{y <= q}); non-negative."""
    y = np.asarray(y, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    if y.shape != q_hat.shape:
        raise ValueError("realized and forecast arrays must have the same shape")
    if np.any(np.isnan(y)) or np.any(np.isnan(q_hat)):
        raise ValueError("NaN inputs to the quantile score")
    return (y - q_hat) * (tau - (y <= q_hat))


def tv_weights(qs_history: np.ndarray, window: tuple[int, int], horizon: int) -> np.ndarray:
    """Inverse-score weights over the window rows t_i .. t_i + t_o - horizon.

    ``qs_history`` stacks the per-model score series as rows (K, T). Scores
    are floored at a tiny epsilon before inversion so exact hits cannot blow
    up the weights. Weights are non-negative and sum to one.
    """
    qs = np.atleast_2d(np.asarray(qs_history, dtype=float))
    t_i, t_o = window
    stop = t_i + t_o - horizon + 1
    sl = qs[:, t_i:stop]
    if sl.shape[1] == 0:
        raise ValueError("empty evaluation window")
    inv = 1.0 / np.maximum(sl, QS_FLOOR)
    totals = inv.sum(axis=1)
    return totals / totals.sum()


def tv_weight_series(qs_history: np.ndarray, horizon: int) -> np.ndarray:
    """Running weights: at each time s, inverse scores cumulated over the
    history known when the forecast is made (entries up to s - horizon).

    Returns shape (T, K); rows with no usable history get equal weights.
    """
    qs = np.atleast_2d(np.asarray(qs_history, dtype=float))
    k, t_len = qs.shape
    inv = 1.0 / np.maximum(qs, QS_FLOOR)
    cum = np.cumsum(inv, axis=1)
    out = np.empty((t_len, k))
    for s in range(t_len):
        known = s - horizon
        if known < 0:
            out[s] = 1.0 / k
        else:
            totals = cum[:, known]
            out[s] = totals / totals.sum()
    return out


def avg_weights(tv: np.ndarray) -> np.ndarray:
    """Temporal average of time-varying weights; stays on the simplex."""
    tv = np.atleast_2d(np.asarray(tv, dtype=float))
    if tv.shape[0] == 0:
        raise ValueError("no weight rows to average")
    return tv.mean(axis=0)


def combine_forecasts(weights: np.ndarray, forecasts: np.ndarray) -> float | np.ndarray:
    """Convex combination of the per-model quantile forecasts."""
    weights = np.asarray(weights, dtype=float)
    forecasts = np.asarray(forecasts, dtype=float)
    if weights.shape[0] != forecasts.shape[0]:
        raise ValueError("one weight per model forecast is required")
    return np.tensordot(weights, forecasts, axes=(0, 0))


@dataclass(frozen=True)
class DMResult:
    statistic: float
    pvalue: float
    degenerate: bool = False


def diebold_mariano(
    loss_benchmark: np.ndarray, loss_alt: np.ndarray, horizon: int = 1
) -> DMResult:
    """One-sided test of equal predictive accuracy on the loss differential.

    d_t = benchmark loss - alternative loss; a positive statistic favors the
    alternative. The long-run variance uses a Bartlett kernel with truncation
    lag horizon - 1 and the p-value is the standard normal upper tail.
    Identical losses yield a degenerate result instead of a p-value.
    """
    d = np.asarray(loss_benchmark, dtype=float) - np.asarray(loss_alt, dtype=float)
    if d.ndim != 1 or d.shape[0] != np.asarray(loss_alt).shape[0]:
        raise ValueError("loss series must be 1-D and equal length")
    t_len = d.shape[0]
    if t_len < 10:
        raise ValueError("need at least 10 loss observations")
    d_bar = d.mean()
    dev = d - d_bar
    lrv = float(dev @ dev) / t_len
    for lag in range(1, horizon):
        cov = float(dev[lag:] @ dev[:-lag]) / t_len
        lrv += 2.0 * (1.0 - lag / horizon) * cov
    if lrv <= 0.0:
        return DMResult(statistic=np.nan, pvalue=np.nan, degenerate=True)
    stat = d_bar / np.sqrt(lrv / t_len)
    return DMResult(statistic=float(stat), pvalue=float(norm.sf(stat)), degenerate=False)


def _stars(pvalue: float, degenerate: bool) -> int:
    if degenerate or np.isnan(pvalue):
        return 0
    for level, count in ((0.01, 3), (0.05, 2), (0.10, 1)):
        if pvalue < level:
            return count
    return 0


def _records_by_key(records: list[ForecastRecord]):
    table: dict[tuple, dict[str, dict[str, float]]] = {}
    for rec in records:
        cell = table.setdefault((rec.horizon, rec.tau, rec.variable), {})
        cell.setdefault(rec.model_id, {})[rec.origin_date] = rec.q_hat_raw
    return table


def _realized_lookup(panel: TimeSeriesPanel, horizon: int) -> dict[str, np.ndarray]:
    """Map a forecast origin date to the realized vector ``horizon`` rows later."""
    out = {}
    for idx in range(panel.t_len - horizon):
        out[panel.dates[idx]] = panel.values[idx + horizon]
    return out


def _loss_series(
    records: list[ForecastRecord], panel: TimeSeriesPanel
) -> dict[tuple, dict[str, tuple[list[str], np.ndarray]]]:
    """Per (horizon, tau, variable, model): aligned origin dates and losses."""
    table = _records_by_key(records)
    out: dict[tuple, dict[str, tuple[list[str], np.ndarray]]] = {}
    for (horizon, tau, variable), models in table.items():
        realized = _realized_lookup(panel, horizon)
        cell = {}
        for model_id, by_date in models.items():
            dates = sorted(d for d in by_date if d in realized)
            if not dates:
                continue
            y = np.array([realized[d][variable] for d in dates])
            q = np.array([by_date[d] for d in dates])
            cell[model_id] = (dates, quantile_score(y, q, tau))
        out[(horizon, tau, variable)] = cell
    return out


@dataclass(frozen=True)
class ScoreRow:
    horizon: int
    tau: float
    variable: int
    model_id: str
    mean_qs: float
    ratio: float
    dm_statistic: float
    dm_pvalue: float
    stars: int
    mcs_member: None = None  # reserved; the membership procedure is external


def score_table(
    records: list[ForecastRecord],
    panel: TimeSeriesPanel,
    *,
    benchmark: str,
) -> list[ScoreRow]:
    """Mean score for the benchmark, ratios and DM stars for the others.

    Ratios below one favor the alternative model; stars mark one-sided DM
    rejections at the 10/5/1 percent levels against the benchmark.
    """
    model_ids = sorted({rec.model_id for rec in records})
    if benchmark not in model_ids:
        raise ValueError(f"benchmark model '{benchmark}' not present in the records")
    rows: list[ScoreRow] = []
    for (horizon, tau, variable), cell in sorted(_loss_series(records, panel).items()):
        if benchmark not in cell:
            continue
        bench_dates, bench_loss = cell[benchmark]
        bench_mean = float(bench_loss.mean())
        for model_id in sorted(cell):
            dates, loss = cell[model_id]
            if model_id == benchmark:
                rows.append(
                    ScoreRow(horizon, tau, variable, model_id, bench_mean, 1.0,
                             np.nan, np.nan, 0)
                )
                continue
            if dates != bench_dates:
                common = sorted(set(dates) & set(bench_dates))
                loss = np.array([loss[dates.index(d)] for d in common])
                bloss = np.array([bench_loss[bench_dates.index(d)] for d in common])
            else:
                bloss = bench_loss
            ratio = float(loss.mean() / bench_mean)
            dm = diebold_mariano(bloss, loss, horizon)
            rows.append(
                ScoreRow(horizon, tau, variable, model_id, float(loss.mean()), ratio,
                         dm.statistic, dm.pvalue, _stars(dm.pvalue, dm.degenerate))
            )
    return rows


def combined_records(
    records: list[ForecastRecord],
    panel: TimeSeriesPanel,
) -> list[ForecastRecord]:
    """Score-weighted combination forecasts as extra model ids COMB-TV, COMB-AVG.

    Time-varying weights at each origin use the scores of forecasts whose
    outcomes were realized by then; the averaged scheme applies the temporal
    mean of those weights to every origin.
    """
    table = _records_by_key(records)
    out: list[ForecastRecord] = []
    for (horizon, tau, variable), models in sorted(table.items()):
        realized = _realized_lookup(panel, horizon)
        model_ids = sorted(models)
        if len(model_ids) < 2:
            continue
        dates = sorted(set.intersection(*(set(models[m]) for m in model_ids)))
        scored_dates = [d for d in dates if d in realized]
        if not scored_dates:
            continue
        qs = np.empty((len(model_ids), len(scored_dates)))
        for i, model_id in enumerate(model_ids):
            y = np.array([realized[d][variable] for d in scored_dates])
            q = np.array([models[model_id][d] for d in scored_dates])
            qs[i] = quantile_score(y, q, tau)
        weights_tv = tv_weight_series(qs, horizon)
        weights_avg = avg_weights(weights_tv)
        for s, date in enumerate(scored_dates):
            forecasts = np.array([models[m][date] for m in model_ids])
            for scheme, weights in (("COMB-TV", weights_tv[s]), ("COMB-AVG", weights_avg)):
                out.append(
                    ForecastRecord(
                        origin_date=date,
                        horizon=horizon,
                        tau=tau,
                        variable=variable,
                        model_id=scheme,
                        q_hat_std=np.nan,
                        q_hat_raw=float(combine_forecasts(weights, forecasts)),
                    )
                )
    return out


def weight_tables(
    records: list[ForecastRecord],
    panel: TimeSeriesPanel,
) -> tuple[list[dict], list[dict]]:
    """Time-varying and averaged combination-weight tables as plain rows.

    Returns (tv_rows, avg_rows); tv rows carry one weight per
    (horizon, tau, variable, origin_date, model), avg rows one per
    (horizon, tau, variable, model).
    """
    table = _records_by_key(records)
    tv_rows: list[dict] = []
    avg_rows: list[dict] = []
    for (horizon, tau, variable), models in sorted(table.items()):
        realized = _realized_lookup(panel, horizon)
        model_ids = sorted(models)
        if len(model_ids) < 2:
            continue
        dates = sorted(set.intersection(*(set(models[m]) for m in model_ids)))
        scored_dates = [d for d in dates if d in realized]
        if not scored_dates:
            continue
        qs = np.empty((len(model_ids), len(scored_dates)))
        for i, model_id in enumerate(model_ids):
            y = np.array([realized[d][variable] for d in scored_dates])
            q = np.array([models[model_id][d] for d in scored_dates])
            qs[i] = quantile_score(y, q, tau)
        weights_tv = tv_weight_series(qs, horizon)
        weights_avg = avg_weights(weights_tv)
        for s, date in enumerate(scored_dates):
            for i, model_id in enumerate(model_ids):
                tv_rows.append(
                    {"horizon": horizon, "tau": tau, "variable": variable,
                     "origin_date": date, "model_id": model_id,
                     "weight": float(weights_tv[s, i])}
                )
        for i, model_id in enumerate(model_ids):
            avg_rows.append(
                {"horizon": horizon, "tau": tau, "variable": variable,
                 "model_id": model_id, "weight": float(weights_avg[i])}
            )
    return tv_rows, avg_rows


def score_table_to_csv(rows: list[ScoreRow], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["horizon", "tau", "variable", "model_id", "mean_qs", "ratio",
             "dm_statistic", "dm_pvalue", "stars", "mcs_member"]
        )
        for row in rows:
            writer.writerow(
                [row.horizon, f"{row.tau:.12g}", row.variable, row.model_id,
                 f"{row.mean_qs:.12g}", f"{row.ratio:.12g}",
                 "" if np.isnan(row.dm_statistic) else f"{row.dm_statistic:.12g}",
                 "" if np.isnan(row.dm_pvalue) else f"{row.dm_pvalue:.12g}",
                 row.stars, ""]
            )


def render_score_table(rows: list[ScoreRow], variable_names: tuple[str, ...] | None = None) -> str:
    """Aligned plain-text table: benchmark scores, ratios with stars for the rest."""
    def var_label(idx: int) -> str:
        return variable_names[idx] if variable_names else f"var{idx}"

    lines = []
    header = f"{'h':>3} {'tau':>6} {'variable':>10} {'model':>14} {'value':>10} {'stars':>6}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in rows:
        value = row.mean_qs if row.ratio == 1.0 and np.isnan(row.dm_statistic) else row.ratio
        lines.append(
            f"{row.horizon:>3} {row.tau:>6.3f} {var_label(row.variable):>10} "
            f"{row.model_id:>14} {value:>10.4f} {'*' * row.stars:>6}"
        )
    return "\n".join(lines) + "\n"
