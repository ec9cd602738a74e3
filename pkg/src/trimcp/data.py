"""Synthetic benchmark data and trip-record ingestion.

Synthetic draws follow a sparse linear model with either independent
standard-normal features or an AR(1) row covariance (corr 0.9^|i-j|), and
gaussian or t(5) noise. Ingestion turns raw trip CSVs into a day x station
rental-count matrix.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime, timedelta

import numpy as np

from .solvers import Dataset

log = logging.getLogger(__name__)

CORR_TAGS = ("uncorrelated", "ar09")
NOISE_TAGS = ("gaussian", "t5")

TIMESTAMP_FORMATS = (
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M",
    "%m/%d/%Y %H:%M",
)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    p: int
    k: int
    corr: str = "uncorrelated"
    noise: str = "gaussian"
    beta_value: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 0 <= self.k <= self.p:
            raise ValueError(f"need 0 <= k <= p, got k={self.k}, p={self.p}")
        if self.corr not in CORR_TAGS:
            raise ValueError(f"corr must be one of {CORR_TAGS}, got {self.corr!r}")
        if self.noise not in NOISE_TAGS:
            raise ValueError(f"noise must be one of {NOISE_TAGS}, got {self.noise!r}")


def _draw_features(rng, rows, p, corr):
    Z = rng.standard_normal((rows, p))
    if corr == "uncorrelated":
        return Z
    # AR(1) recursion gives exact covariance 0.9^|i-j| in O(p) per row
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    scale = math.sqrt(1.0 - 0.81)
    for j in range(1, p):
        X[:, j] = 0.9 * X[:, j - 1] + scale * Z[:, j]
    return X


def gen_synthetic(spec: SyntheticSpec):
    """Draw (training Dataset, x_new, y_new, beta_true) for one trial."""
    rng = np.random.default_rng(spec.seed)
    rows = spec.n + 1
    X = _draw_features(rng, rows, spec.p, spec.corr)
    support = rng.choice(spec.p, size=spec.k, replace=False)
    beta_true = np.zeros(spec.p)
    beta_true[support] = spec.beta_value
    if spec.noise == "gaussian":
        eps = rng.standard_normal(rows)
    else:
        eps = rng.standard_t(5, size=rows)
    Y = X @ beta_true + eps
    data = Dataset(X[: spec.n], Y[: spec.n])
    return data, X[spec.n], float(Y[spec.n]), beta_true


def default_lambda(n_eff: int, p: int, noise: str = "gaussian") -> float:
    """sqrt(n_eff * log p), inflated by sqrt(5/3) for t(5) noise."""
    if n_eff < 1:
        raise ValueError(f"n_eff must be >= 1, got {n_eff}")
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    lam = math.sqrt(n_eff * math.log(p))
    if noise == "t5":
        lam *= math.sqrt(5.0 / 3.0)
    elif noise != "gaussian":
        raise ValueError(f"noise must be one of {NOISE_TAGS}, got {noise!r}")
    return lam


@dataclass(frozen=True)
class StationDayMatrix:
    """Rental counts, one row per calendar day, one column per active station."""

    counts: np.ndarray
    station_ids: tuple
    dates: tuple

    def __post_init__(self):
        if self.counts.shape != (len(self.dates), len(self.station_ids)):
            raise ValueError("counts shape must be (days, stations)")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")


def _parse_timestamp(raw, fmts):
    for fmt in fmts:
        try:
            return datetime.strptime(raw, fmt)
        except ValueError:
            continue
    return None


def ingest_trips(
    csv_paths,
    window,
    col_start_time="Start date",
    col_start_station="Start station",
    timestamp_formats=TIMESTAMP_FORMATS,
) -> StationDayMatrix:
    """Count rentals by (start date, start station) over a date window.

    window is an inclusive (first_day, last_day) pair of datetime.date.
    Every day in the window becomes a row; stations with no activity in the
    window are dropped. Unparseable rows are skipped and counted in a log
    message; a missing required column raises.
    """
    start_day, end_day = window
    if start_day > end_day:
        raise ValueError(f"empty window {start_day}..{end_day}")
    n_days = (end_day - start_day).days + 1
    dates = tuple(start_day + timedelta(days=i) for i in range(n_days))

    tallies: dict[str, np.ndarray] = {}
    skipped = 0
    for path in csv_paths:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ValueError(f"{path}: no header row")
            missing = {col_start_time, col_start_station} - set(reader.fieldnames)
            if missing:
                raise ValueError(f"{path}: missing required columns {sorted(missing)}")
            for row in reader:
                ts = _parse_timestamp((row[col_start_time] or "").strip(), timestamp_formats)
                station = (row[col_start_station] or "").strip()
                if ts is None or not station:
                    skipped += 1
                    continue
                day = ts.date()
                if not start_day <= day <= end_day:
                    continue
                counts = tallies.get(station)
                if counts is None:
                    counts = tallies.setdefault(station, np.zeros(n_days, dtype=int))
                counts[(day - start_day).days] += 1
    if skipped:
        log.warning("ingest_trips: skipped %d unparseable rows", skipped)

    station_ids = tuple(sorted(tallies))
    counts = (
        np.column_stack([tallies[s] for s in station_ids])
        if station_ids
        else np.zeros((n_days, 0), dtype=int)
    )
    return StationDayMatrix(counts=counts, station_ids=station_ids, dates=dates)


def write_matrix_csv(matrix: StationDayMatrix, path):
    """Matrix export: header of station ids, one row per date."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *matrix.station_ids])
        for i, day in enumerate(matrix.dates):
            writer.writerow([day.isoformat(), *matrix.counts[i].tolist()])


def read_matrix_csv(path) -> StationDayMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        station_ids = tuple(header[1:])
        dates = []
        rows = []
        for row in reader:
            dates.append(date.fromisoformat(row[0]))
            rows.append([int(v) for v in row[1:]])
    return StationDayMatrix(
        counts=np.asarray(rows, dtype=int), station_ids=station_ids, dates=tuple(dates)
    )


def make_regression_task(matrix: StationDayMatrix, response_station: int, test_day: int):
    """One station's count as response, the others as features, one day held out."""
    n_days, n_stations = matrix.counts.shape
    if not 0 <= response_station < n_stations:
        raise ValueError(f"response_station {response_station} out of range")
    if not 0 <= test_day < n_days:
        raise ValueError(f"test_day {test_day} out of range")
    feat_cols = [j for j in range(n_stations) if j != response_station]
    day_rows = [i for i in range(n_days) if i != test_day]
    counts = matrix.counts.astype(float)
    X = counts[np.ix_(day_rows, feat_cols)]
    Y = counts[day_rows, response_station]
    x_new = counts[test_day, feat_cols]
    y_new = float(counts[test_day, response_station])
    return Dataset(X, Y), x_new, y_new
