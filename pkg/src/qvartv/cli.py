"""Batch command-line interface.

Subcommands: simulate | estimate | backtest | evaluate | report. Every run
reads one INI config (see config.py for the grammar), takes ``--seed``,
``--threads``, and ``--out``, writes all outputs under the output directory,
and maintains a manifest.json of SHA-256 hashes there. Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import REGIME_BY_MODEL_ID, Config, ConfigError, load_config
from .data_io import TimeSeriesPanel, growth_rates, load_csv, save_csv
from .evaluate import (
    combined_records,
    render_score_table,
    score_table,
    score_table_to_csv,
    weight_tables,
)
from .forecast import records_from_csv, records_to_csv, run_backtest
from .gibbs import NumericalPosteriorError
from .sampler import fit_quantile_model
from .simstudy import simulate_dgp

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _update_manifest(out_dir: Path, paths: list[Path]) -> None:
    manifest_path = out_dir / "manifest.json"
    manifest = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
    for path in paths:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        manifest[str(path.relative_to(out_dir))] = digest
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_panel(cfg: Config) -> TimeSeriesPanel:
    csv_path = cfg.get_str("data", "csv")
    if not csv_path:
        raise ConfigError("[data] csv is required")
    panel = load_csv(csv_path)
    transform = (cfg.get_str("data", "transform", "none") or "none").lower()
    if transform == "growth_rates":
        panel = growth_rates(panel)
    elif transform != "none":
        raise ConfigError(f"[data] transform must be none or growth_rates, got {transform!r}")
    return panel


def _cmd_simulate(cfg: Config, seed: int, out_dir: Path, threads: int) -> int:
    import datetime

    n = cfg.get_int("simulate", "n", 4)
    t_len = cfg.get_int("simulate", "t_len", 200)
    values, b_true, h_true = simulate_dgp(n, t_len, seed=seed, config=cfg.dgp())
    # synthetic daily calendar, purely positional
    start = datetime.date(2000, 1, 3)
    dates = tuple((start + datetime.timedelta(days=i)).isoformat() for i in range(t_len))
    panel = TimeSeriesPanel(
        dates=dates, values=values, names=tuple(f"y{j + 1}" for j in range(n))
    )
    panel_path = out_dir / "panel.csv"
    save_csv(panel, panel_path)
    truth_path = out_dir / "truth.json"
    truth_path.write_text(
        json.dumps(
            {"seed": seed, "b_true": b_true.tolist(), "n": n, "t_len": t_len},
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    paths_path = out_dir / "truth_paths.npz"
    np.savez_compressed(paths_path, h_true=h_true)
    _update_manifest(out_dir, [panel_path, truth_path, paths_path])
    print(f"wrote {panel_path} ({t_len} rows, {n} variables)")
    return EXIT_OK


def _cmd_estimate(cfg: Config, seed: int, out_dir: Path, threads: int) -> int:
    panel = _load_panel(cfg)
    model_ids = cfg.get_strs("estimate", "models", ("qvar", "qvar-sv"))
    taus = cfg.get_floats("estimate", "taus", (0.1, 0.5, 0.9))
    acceptance_rows = []
    written = []
    t_start = time.time()
    for m_idx, model_id in enumerate(model_ids):
        if model_id not in REGIME_BY_MODEL_ID:
            raise ConfigError(f"[estimate] unknown model id {model_id!r}")
        for q_idx, tau in enumerate(taus):
            spec = cfg.model_spec(model_id, tau)
            rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE5, m_idx, q_idx]))
            draws = fit_quantile_model(panel.values, spec, rng=rng)
            name = f"draws_{model_id}_tau{tau:g}.npz"
            path = out_dir / name
            draws.save_npz(path)
            written.append(path)
            for block, rate in sorted(draws.acceptance.items()):
                acceptance_rows.append([model_id, f"{tau:g}", block, f"{rate:.6f}"])
            print(f"estimated {model_id} tau={tau:g}: " +
                  ", ".join(f"{b}={r:.3f}" for b, r in sorted(draws.acceptance.items())))
    acc_path = out_dir / "acceptance_rates.csv"
    with acc_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["model_id", "tau", "block", "acceptance_rate"])
        writer.writerows(acceptance_rows)
    runtime_path = out_dir / "runtime.json"
    runtime_path.write_text(
        json.dumps({"seconds": time.time() - t_start, "models": list(model_ids),
                    "taus": list(taus)}, indent=2, sort_keys=True) + "\n"
    )
    _update_manifest(out_dir, written + [acc_path, runtime_path])
    return EXIT_OK


def _cmd_backtest(cfg: Config, seed: int, out_dir: Path, threads: int) -> int:
    panel = _load_panel(cfg)
    plan = cfg.backtest_plan()
    model_ids = cfg.get_strs("backtest", "models", ("qvar", "qvar-sv"))
    specs = {model_id: cfg.model_spec(model_id, 0.5) for model_id in model_ids}
    records = run_backtest(
        panel, plan, specs, master_seed=seed, checkpoint_dir=out_dir, n_workers=threads
    )
    records_path = out_dir / "forecast_records.csv"
    records_to_csv(records, records_path)
    _update_manifest(out_dir, [records_path])
    print(f"wrote {records_path} ({len(records)} records)")
    return EXIT_OK


def _cmd_evaluate(cfg: Config, seed: int, out_dir: Path, threads: int,
                  records_path: str | None, realized_path: str | None) -> int:
    records_path = records_path or cfg.get_str("evaluate", "records")
    realized_path = realized_path or cfg.get_str("evaluate", "realized")
    if not records_path or not realized_path:
        raise ConfigError("[evaluate] records and realized paths are required")
    records = records_from_csv(records_path)
    panel = load_csv(realized_path)
    transform = (cfg.get_str("data", "transform", "none") or "none").lower()
    if transform == "growth_rates":
        panel = growth_rates(panel)
    benchmark = cfg.get_str("evaluate", "benchmark", "qvar")
    model_ids = {rec.model_id for rec in records}
    if benchmark not in model_ids:
        raise ConfigError(
            f"[evaluate] benchmark '{benchmark}' not among record model ids {sorted(model_ids)}"
        )

    extra = combined_records(records, panel)
    all_records = records + extra
    rows = score_table(all_records, panel, benchmark=benchmark)
    written = []

    table_csv = out_dir / "score_table.csv"
    score_table_to_csv(rows, table_csv)
    written.append(table_csv)
    table_txt = out_dir / "score_table.txt"
    table_txt.write_text(render_score_table(rows, panel.names))
    written.append(table_txt)

    tv_rows, avg_rows = weight_tables(records, panel)
    tv_path = out_dir / "weights_tv.csv"
    with tv_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["horizon", "tau", "variable", "origin_date", "model_id", "weight"])
        for row in tv_rows:
            writer.writerow([row["horizon"], f"{row['tau']:.12g}", row["variable"],
                             row["origin_date"], row["model_id"], f"{row['weight']:.12g}"])
    written.append(tv_path)
    avg_path = out_dir / "weights_avg.csv"
    with avg_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["horizon", "tau", "variable", "model_id", "weight"])
        for row in avg_rows:
            writer.writerow([row["horizon"], f"{row['tau']:.12g}", row["variable"],
                             row["model_id"], f"{row['weight']:.12g}"])
    written.append(avg_path)

    combined_path = out_dir / "records_with_combinations.csv"
    records_to_csv(all_records, combined_path)
    written.append(combined_path)

    _update_manifest(out_dir, written)
    print(render_score_table(rows, panel.names))
    return EXIT_OK


def _cmd_report(cfg: Config, seed: int, out_dir: Path, threads: int,
                scores_path: str | None) -> int:
    scores_path = Path(scores_path or out_dir / "score_table.csv")
    if not scores_path.exists():
        raise FileNotFoundError(f"score table not found: {scores_path}")
    lines = []
    with scores_path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        header = f"{'h':>3} {'tau':>6} {'variable':>10} {'model':>14} {'value':>10} {'stars':>6}"
        lines.append(header)
        lines.append("-" * len(header))
        for row in reader:
            is_benchmark = row["ratio"] == "1" and not row["dm_statistic"]
            value = row["mean_qs"] if is_benchmark else row["ratio"]
            lines.append(
                f"{row['horizon']:>3} {float(row['tau']):>6.3f} {row['variable']:>10} "
                f"{row['model_id']:>14} {float(value):>10.4f} {'*' * int(row['stars']):>6}"
            )
    text = "\n".join(lines) + "\n"
    report_path = out_dir / "report.txt"
    report_path.write_text(text)
    _update_manifest(out_dir, [report_path])
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qvartv",
        description="Bayesian quantile VAR with time-varying volatility: "
                    "simulation, estimation, backtesting, and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "simulate a heteroskedastic VAR panel and write it with its truth sidecar"),
        ("estimate", "fit models on a panel and persist posterior draws"),
        ("backtest", "rolling-window quantile forecasting exercise"),
        ("evaluate", "score forecast records, build combinations, run DM tests"),
        ("report", "render a score table CSV as aligned text"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=(name != "report"), help="INI config path")
        cmd.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        cmd.add_argument("--threads", type=int, default=1, help="worker pool cap")
        cmd.add_argument("--out", required=True, help="output directory")
        if name == "evaluate":
            cmd.add_argument("--records", default=None, help="forecast records CSV")
            cmd.add_argument("--realized", default=None, help="realized panel CSV")
        if name == "report":
            cmd.add_argument("--scores", default=None, help="score table CSV path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else Config.empty()
        seed = args.seed if args.seed is not None else cfg.get_int("run", "seed", 0)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return _cmd_simulate(cfg, seed, out_dir, args.threads)
        if args.command == "estimate":
            return _cmd_estimate(cfg, seed, out_dir, args.threads)
        if args.command == "backtest":
            return _cmd_backtest(cfg, seed, out_dir, args.threads)
        if args.command == "evaluate":
            return _cmd_evaluate(cfg, seed, out_dir, args.threads, args.records, args.realized)
        return _cmd_report(cfg, seed, out_dir, args.threads, args.scores)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalPosteriorError, OverflowError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
