"""CSV ingestion, growth-rate and standardization transforms, summary moments.

Input files carry a header row whose first column is ``date`` (ISO-8601) and
whose remaining columns are numeric; UTF-8, '.' decimal separator, no
thousands separators. Rows with missing or unparsable cells are rejected with
row/column diagnostics; nothing is imputed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TimeSeriesPanel",
    "load_csv",
    "save_csv",
    "growth_rates",
    "standardize",
    "destandardize",
    "summary_stats",
]


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Dated n-variate observation matrix plus a log of applied transforms."""

    dates: tuple[str, ...]
    values: np.ndarray  # (T, n)
    names: tuple[str, ...]
    transform_log: tuple[dict, ...] = field(default_factory=tuple)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a (T, n) matrix")
        if len(self.dates) != values.shape[0]:
            raise ValueError("dates and values row counts differ")
        if len(self.names) != values.shape[1]:
            raise ValueError("names and values column counts differ")
        if np.any(~np.isfinite(values)):
            raise ValueError("panel contains non-finite values")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        object.__setattr__(self, "values", values)

    @property
    def t_len(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def load_csv(path) -> TimeSeriesPanel:
    """Read and validate a panel; reject missing values with row diagnostics."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if not header or header[0].strip().lower() != "date":
            raise ValueError(f"{path}: first column must be 'date'")
        names = tuple(name.strip() for name in header[1:])
        if not names:
            raise ValueError(f"{path}: no value columns")
        dates: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(names) + 1:
                raise ValueError(f"{path}: row {lineno} has {len(row)} cells, expected {len(names) + 1}")
            date = row[0].strip()
            if not date:
                raise ValueError(f"{path}: row {lineno} has an empty date")
            parsed = []
            for col, cell in zip(names, row[1:]):
                text = cell.strip()
                if not text:
                    raise ValueError(f"{path}: row {lineno} column '{col}' is blank")
                try:
                    value = float(text)
                except ValueError:
                    raise ValueError(f"{path}: row {lineno} column '{col}' is not numeric: {text!r}") from None
                if not np.isfinite(value):
                    raise ValueError(f"{path}: row {lineno} column '{col}' is non-finite")
                parsed.append(value)
            if dates and date <= dates[-1]:
                kind = "duplicate" if date == dates[-1] else "non-monotone"
                raise ValueError(f"{path}: row {lineno} has {kind} date {date}")
            dates.append(date)
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return TimeSeriesPanel(dates=tuple(dates), values=np.array(rows), names=names)


def save_csv(panel: TimeSeriesPanel, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", *panel.names])
        for date, row in zip(panel.dates, panel.values):
            writer.writerow([date, *(f"{v:.12g}" for v in row)])


def growth_rates(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Percentage changes 100 * (x_t - x_{t-1}) / x_{t-1}; drops the first row."""
    if np.any(panel.values <= 0.0):
        bad = np.argwhere(panel.values <= 0.0)[0]
        raise ValueError(
            f"growth rates need strictly positive levels; "
            f"found {panel.values[bad[0], bad[1]]} at row {bad[0]} column '{panel.names[bad[1]]}'"
        )
    rates = 100.0 * np.diff(panel.values, axis=0) / panel.values[:-1]
    log = panel.transform_log + ({"transform": "growth_rates"},)
    return TimeSeriesPanel(
        dates=panel.dates[1:], values=rates, names=panel.names, transform_log=log
    )


def standardize(panel: TimeSeriesPanel) -> tuple[TimeSeriesPanel, dict]:
    """Column-wise mean 0, sample (T-1 divisor) standard deviation 1.

    Returns the transformed panel and the constants needed for exact inversion.
    """
    if panel.t_len < 2:
        raise ValueError("standardization needs at least two rows")
    mean = panel.values.mean(axis=0)
    sd = panel.values.std(axis=0, ddof=1)
    if np.any(sd == 0.0):
        col = panel.names[int(np.argmax(sd == 0.0))]
        raise ValueError(f"column '{col}' has zero variance")
    constants = {"mean": mean, "sd": sd}
    log = panel.transform_log + (
        {"transform": "standardize", "mean": mean.tolist(), "sd": sd.tolist()},
    )
    out = TimeSeriesPanel(
        dates=panel.dates,
        values=(panel.values - mean) / sd,
        names=panel.names,
        transform_log=log,
    )
    return out, constants


def destandardize(values: np.ndarray, constants: dict) -> np.ndarray:
    """Exact inverse of ``standardize`` applied to an array in panel units."""
    return np.asarray(values) * constants["sd"] + constants["mean"]


def _moments(values: np.ndarray) -> dict[str, np.ndarray]:
    t_len = values.shape[0]
    centered = values - values.mean(axis=0)
    m2 = np.mean(centered**2, axis=0)
    m3 = np.mean(centered**3, axis=0)
    m4 = np.mean(centered**4, axis=0)
    return {
        "variance": values.var(axis=0, ddof=1),
        "skewness": m3 / m2**1.5,
        # non-excess: Gaussian reference value is 3
        "kurtosis": m4 / m2**2,
    }


def summary_stats(
    panel: TimeSeriesPanel,
    periods: dict[str, tuple[str, str]] | None = None,
) -> dict[str, dict[str, np.ndarray]]:
    """Per-variable variance, skewness, and (non-excess) kurtosis per period.

    Variance uses the T-1 divisor; skewness and kurtosis are the unadjusted
    standardized moment ratios. ``periods`` maps a label to an inclusive
    (start, end) ISO-date range; omitted, the full sample is summarized.
    """
    if periods is None:
        periods = {"full": (panel.dates[0], panel.dates[-1])}
    dates = np.array(panel.dates)
    out = {}
    for label, (start, end) in periods.items():
        mask = (dates >= start) & (dates <= end)
        if int(mask.sum()) < 4:
            raise ValueError(f"period '{label}' has fewer than 4 observations")
        out[label] = _moments(panel.values[mask])
    return out
