from __future__ import annotations

import numpy as np
import pytest

from qvartv.data_io import TimeSeriesPanel
from qvartv.evaluate import (
    avg_weights,
    combine_forecasts,
    combined_records,
    diebold_mariano,
    quantile_score,
    render_score_table,
    score_table,
    score_table_to_csv,
    tv_weight_series,
    tv_weights,
    weight_tables,
)
from qvartv.forecast import ForecastRecord


class TestQuantileScore:
    def test_above_forecast(self):
        assert quantile_score(np.array([1.0]), np.array([0.0]), 0.1)[0] == pytest.approx(0.1)

    def test_below_forecast(self):
        assert quantile_score(np.array([0.0]), np.array([1.0]), 0.1)[0] == pytest.approx(0.9)

    def test_exact_hit_scores_zero(self):
        assert quantile_score(np.array([1.0]), np.array([1.0]), 0.3)[0] == 0.0

    def test_nonnegative_and_zero_iff_hit(self, rng):
        y = rng.normal(size=500)
        q = rng.normal(size=500)
        scores = quantile_score(y, q, 0.25)
        assert np.all(scores >= 0.0)
        assert np.all((scores == 0.0) == (y == q))

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="NaN"):
            quantile_score(np.array([np.nan]), np.array([0.0]), 0.5)


class TestWeights:
    def test_constant_scores(self):
        qs = np.array([[1.0] * 4, [3.0] * 4])
        w = tv_weights(qs, window=(0, 4), horizon=1)
        np.testing.assert_allclose(w, [0.75, 0.25])

    def test_identical_histories(self):
        qs = np.tile(np.array([0.4, 1.3, 0.8, 2.0]), (3, 1))
        np.testing.assert_allclose(tv_weights(qs, (0, 4), 1), 1.0 / 3.0)

    def test_hand_built_table(self):
        # 3 models x 4 periods, h = 1: weights over all four columns
        qs = np.array(
            [
                [0.5, 1.0, 0.25, 0.5],
                [1.0, 1.0, 1.0, 1.0],
                [2.0, 0.5, 0.5, 1.0],
            ]
        )
        inv_sums = np.array(
            [2 + 1 + 4 + 2, 1 + 1 + 1 + 1, 0.5 + 2 + 2 + 1]
        )
        want = inv_sums / inv_sums.sum()
        np.testing.assert_allclose(tv_weights(qs, (0, 4), 1), want, atol=1e-12)

    def test_simplex_property(self, rng):
        qs = rng.exponential(size=(5, 30)) + 1e-6
        w = tv_weights(qs, (3, 20), 2)
        assert np.all(w >= 0.0)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_zero_scores_floored(self):
        qs = np.array([[0.0, 0.0], [1.0, 1.0]])
        w = tv_weights(qs, (0, 2), 1)
        assert np.all(np.isfinite(w))
        assert w[0] > 0.99  # exact hits dominate but stay finite

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            tv_weights(np.ones((2, 5)), (4, 1), 2)

    def test_avg_of_constant_series(self):
        tv = np.tile(np.array([0.6, 0.4]), (7, 1))
        np.testing.assert_allclose(avg_weights(tv), [0.6, 0.4])

    def test_avg_two_period_flip(self):
        tv = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(avg_weights(tv), [0.5, 0.5])

    def test_avg_stays_on_simplex(self, rng):
        raw = rng.exponential(size=(40, 4))
        tv = raw / raw.sum(axis=1, keepdims=True)
        out = avg_weights(tv)
        assert np.all(out >= 0.0)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)

    def test_running_series_uses_only_known_history(self):
        qs = np.array([[1.0, 1.0, 4.0], [1.0, 1.0, 0.5]])
        series = tv_weight_series(qs, horizon=1)
        np.testing.assert_allclose(series[0], [0.5, 0.5])  # no history yet
        np.testing.assert_allclose(series[1], [0.5, 0.5])  # first score only
        assert series[2, 0] == pytest.approx(0.5)  # still equal after two equal scores


class TestCombine:
    def test_degenerate_weights(self):
        assert combine_forecasts(np.array([1.0, 0.0]), np.array([2.5, 9.9])) == 2.5

    def test_equal_weights(self):
        assert combine_forecasts(np.array([0.5, 0.5]), np.array([1.0, 3.0])) == 2.0

    def test_convexity_of_pinball_loss(self, rng):
        # per-period combined score never exceeds the worst single model
        for _ in range(200):
            y = rng.normal()
            forecasts = rng.normal(size=3)
            raw = rng.exponential(size=3)
            weights = raw / raw.sum()
            combined = combine_forecasts(weights, forecasts)
            tau = 0.3
            losses = quantile_score(np.full(3, y), forecasts, tau)
            loss_comb = quantile_score(np.array([y]), np.array([combined]), tau)[0]
            assert loss_comb <= losses.max() + 1e-12

    def test_mismatched_lengths(self):
        with pytest.raises(ValueError):
            combine_forecasts(np.array([0.5, 0.5]), np.array([1.0, 2.0, 3.0]))


class TestDieboldMariano:
    def test_identical_losses_degenerate(self):
        loss = np.abs(np.sin(np.arange(20)))
        result = diebold_mariano(loss, loss.copy(), 1)
        assert result.degenerate
        assert np.isnan(result.pvalue)

    def test_power_under_alternative(self, rng):
        rejections = 0
        for _ in range(200):
            d = rng.normal(0.5, 1.0, 400)
            result = diebold_mariano(d, np.zeros(400), 1)
            rejections += result.pvalue < 0.05
        assert rejections / 200 > 0.99

    def test_h1_equals_plain_t_statistic(self):
        bench = np.array([1.2, 0.8, 1.5, 0.9, 1.1, 1.3, 0.7, 1.0, 1.4, 0.6, 1.05, 0.95])
        alt = np.array([0.9, 0.7, 1.2, 1.0, 0.8, 1.1, 0.6, 0.9, 1.0, 0.7, 0.85, 0.75])
        d = bench - alt
        lrv = ((d - d.mean()) ** 2).mean()
        want = d.mean() / np.sqrt(lrv / d.shape[0])
        got = diebold_mariano(bench, alt, 1)
        assert got.statistic == pytest.approx(want, abs=1e-12)

    def test_antisymmetry_exact(self, rng):
        bench = rng.exponential(size=50)
        alt = rng.exponential(size=50)
        fwd = diebold_mariano(bench, alt, 3)
        rev = diebold_mariano(alt, bench, 3)
        assert fwd.statistic == -rev.statistic

    def test_short_series_rejected(self):
        with pytest.raises(ValueError, match="10"):
            diebold_mariano(np.ones(5), np.zeros(5), 1)


def make_records(losses_by_model, dates, tau=0.1, variable=0, horizon=1):
    """Records engineered so the realized value is 0 and QS = tau * q_hat."""
    records = []
    for model_id, quantile_forecasts in losses_by_model.items():
        for date, q in zip(dates, quantile_forecasts):
            records.append(
                ForecastRecord(
                    origin_date=date, horizon=horizon, tau=tau, variable=variable,
                    model_id=model_id, q_hat_std=q, q_hat_raw=q,
                )
            )
    return records


def flat_panel(dates_plus_h, n=1):
    return TimeSeriesPanel(
        dates=tuple(dates_plus_h),
        values=np.zeros((len(dates_plus_h), n)),
        names=tuple(f"v{i}" for i in range(n)),
    )


class TestScoreTable:
    def _dates(self, count):
        return [f"2022-01-{d + 1:02d}" for d in range(count)]

    def test_benchmark_against_itself(self):
        dates = self._dates(15)
        records = make_records({"qvar": [-1.0] * 15}, dates)
        panel = flat_panel(self._dates(16))
        rows = score_table(records, panel, benchmark="qvar")
        assert len(rows) == 1
        assert rows[0].ratio == 1.0
        assert rows[0].stars == 0

    def test_halved_losses_yield_half_ratio_and_stars(self, rng):
        dates = self._dates(28)
        base = list(-np.abs(rng.normal(2.0, 0.3, 28)))  # forecasts below the zero outcome
        better = [q / 2 for q in base]
        records = make_records({"qvar": base, "alt": better}, dates)
        panel = flat_panel(self._dates(29))
        rows = score_table(records, panel, benchmark="qvar")
        alt_row = next(r for r in rows if r.model_id == "alt")
        assert alt_row.ratio == pytest.approx(0.5, abs=1e-12)
        assert alt_row.stars == 3

    def test_scale_equivariance(self, rng):
        dates = self._dates(20)
        base = list(-np.abs(rng.normal(1.5, 0.4, 20)))
        alt = list(-np.abs(rng.normal(1.2, 0.4, 20)))
        panel = flat_panel(self._dates(21))
        rows_1 = score_table(make_records({"qvar": base, "alt": alt}, dates), panel, benchmark="qvar")
        scaled = {"qvar": [3.7 * q for q in base], "alt": [3.7 * q for q in alt]}
        rows_2 = score_table(make_records(scaled, dates), panel, benchmark="qvar")
        for r1, r2 in zip(rows_1, rows_2):
            assert r1.ratio == pytest.approx(r2.ratio, rel=1e-12)
            assert r1.stars == r2.stars

    def test_missing_benchmark(self):
        records = make_records({"alt": [-1.0] * 12}, self._dates(12))
        with pytest.raises(ValueError, match="benchmark"):
            score_table(records, flat_panel(self._dates(13)), benchmark="qvar")

    def test_csv_contains_reserved_mcs_column(self, tmp_path):
        records = make_records({"qvar": [-1.0] * 12}, self._dates(12))
        rows = score_table(records, flat_panel(self._dates(13)), benchmark="qvar")
        out = tmp_path / "table.csv"
        score_table_to_csv(rows, out)
        header = out.read_text().splitlines()[0]
        assert header.split(",")[-1] == "mcs_member"

    def test_render_plain_text(self):
        records = make_records({"qvar": [-1.0] * 12, "alt": [-0.5] * 12}, self._dates(12))
        rows = score_table(records, flat_panel(self._dates(13)), benchmark="qvar")
        text = render_score_table(rows, ("v0",))
        assert "qvar" in text and "alt" in text
        assert text.endswith("\n")


class TestCombinedRecords:
    def _dates(self, count):
        return [f"2022-02-{d + 1:02d}" for d in range(count)]

    def test_combined_rows_present_iff_two_models(self):
        dates = self._dates(12)
        panel = flat_panel(self._dates(13))
        single = make_records({"qvar": [-1.0] * 12}, dates)
        assert combined_records(single, panel) == []
        double = make_records({"qvar": [-1.0] * 12, "alt": [-0.5] * 12}, dates)
        extra = combined_records(double, panel)
        schemes = {rec.model_id for rec in extra}
        assert schemes == {"COMB-TV", "COMB-AVG"}

    def test_combined_forecast_between_models(self):
        dates = self._dates(12)
        panel = flat_panel(self._dates(13))
        double = make_records({"qvar": [-1.0] * 12, "alt": [-0.5] * 12}, dates)
        for rec in combined_records(double, panel):
            assert -1.0 - 1e-12 <= rec.q_hat_raw <= -0.5 + 1e-12

    def test_weight_tables_simplex(self, rng):
        dates = self._dates(15)
        panel = flat_panel(self._dates(16))
        records = make_records(
            {"m1": list(-np.abs(rng.normal(1, 0.2, 15))),
             "m2": list(-np.abs(rng.normal(1, 0.2, 15))),
             "m3": list(-np.abs(rng.normal(1, 0.2, 15)))},
            dates,
        )
        tv_rows, avg_rows = weight_tables(records, panel)
        by_date: dict[str, float] = {}
        for row in tv_rows:
            by_date[row["origin_date"]] = by_date.get(row["origin_date"], 0.0) + row["weight"]
        for total in by_date.values():
            assert total == pytest.approx(1.0, abs=1e-12)
        assert sum(r["weight"] for r in avg_rows) == pytest.approx(1.0, abs=1e-12)
