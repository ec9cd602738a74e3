"""Generic conformal machinery: rank rule, full conformal over a grid, split conformal.

A fitter is any callable (X, Y) -> predict, where predict maps a 2-d array
of query rows to a vector of predictions. The fitter sees the augmented
(n+1)-point sample, so it must be symmetric in the data points for the
coverage guarantee to hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .solvers import Dataset


class FitterError(RuntimeError):
    """A fitter failed at a candidate response value."""

    def __init__(self, y, cause):
        super().__init__(f"fitter failed at candidate y={y!r}: {cause}")
        self.y = y
        self.cause = cause


@dataclass(frozen=True)
class CandidateGrid:
    """Uniform grid lo, lo+step, ... plus hi itself."""

    lo: float
    hi: float
    step: float = None
    count: int = None

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"lo must be <= hi, got [{self.lo}, {self.hi}]")
        if (self.step is None) == (self.count is None):
            raise ValueError("give exactly one of step or count")
        if self.count is not None:
            if self.count <= 0:
                raise ValueError(f"count must be positive, got {self.count}")
            object.__setattr__(self, "step", (self.hi - self.lo) / self.count)
        if self.step is not None and self.step <= 0 and self.lo < self.hi:
            raise ValueError(f"step must be positive, got {self.step}")

    def points(self) -> np.ndarray:
        if self.hi == self.lo:
            return np.array([self.lo])
        # guard keeps an exact multiple from dropping/duplicating the last point
        k = int(math.floor((self.hi - self.lo) / self.step + 1e-9))
        pts = self.lo + self.step * np.arange(k + 1)
        if pts[-1] >= self.hi - 1e-9 * self.step:
            pts[-1] = self.hi
        else:
            pts = np.append(pts, self.hi)
        return pts


@dataclass(frozen=True)
class PredictionSet:
    """Disjoint closed intervals covering the accepted grid points."""

    intervals: tuple
    grid: CandidateGrid
    accepted_points: np.ndarray

    @property
    def total_width(self):
        return float(sum(b - a for a, b in self.intervals))

    def contains(self, y) -> bool:
        return any(a <= y <= b for a, b in self.intervals)

    @property
    def is_empty(self):
        return len(self.intervals) == 0


@dataclass(frozen=True)
class SplitInterval:
    center: float
    radius: float
    split_indices: np.ndarray

    @property
    def lo(self):
        return self.center - self.radius

    @property
    def hi(self):
        return self.center + self.radius

    def contains(self, y) -> bool:
        return self.lo <= y <= self.hi


def quantile_index(alpha: float, m: int) -> int:
    """ceil((1-alpha)*m), clamped to [1, m].

    The 1e-9 guard keeps exact integer products from rounding up when the
    float arithmetic lands a hair above the integer.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0,1), got {alpha}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    k = math.ceil((1.0 - alpha) * m - 1e-9)
    return min(max(k, 1), m)


def residual_rank(abs_residuals: np.ndarray, test_index: int) -> int:
    """1-based rank of the test entry; ties broken by position."""
    v = np.asarray(abs_residuals, dtype=float)
    vt = v[test_index]
    smaller = int(np.count_nonzero(v < vt))
    tied_before = int(np.count_nonzero((v[:test_index] == vt)))
    return smaller + 1 + tied_before


def conformity_accept(abs_residuals, test_index: int, alpha: float) -> bool:
    """True iff the test residual ranks within the bottom 1-alpha quantile."""
    v = np.asarray(abs_residuals, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite residuals")
    m = v.shape[0]
    if not 0 <= test_index < m:
        raise ValueError(f"test_index {test_index} out of range for {m} residuals")
    return residual_rank(v, test_index) <= quantile_index(alpha, m)


def runs_to_intervals(points, accepted_mask):
    """Maximal runs of consecutive accepted grid points -> closed intervals."""
    intervals = []
    start = None
    for i, ok in enumerate(accepted_mask):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            intervals.append((float(points[start]), float(points[i - 1])))
            start = None
    if start is not None:
        intervals.append((float(points[start]), float(points[-1])))
    return tuple(intervals)


def full_conformal(fitter, data: Dataset, x_new, grid: CandidateGrid, alpha: float) -> PredictionSet:
    """Full conformal prediction: refit at every grid value of the test response.

    For each candidate y the fitter is trained on the n+1 augmented points;
    y is accepted when its absolute residual ranks within the bottom
    1-alpha quantile of all n+1 absolute residuals.
    """
    X, Y = data.X, data.Y
    n = data.n
    x_new = np.asarray(x_new, dtype=float).reshape(-1)
    if x_new.shape[0] != data.p:
        raise ValueError(f"x_new must have length {data.p}")
    X_aug = np.vstack([X, x_new])
    points = grid.points()
    accepted = np.zeros(points.shape[0], dtype=bool)
    for i, y in enumerate(points):
        Y_aug = np.append(Y, y)
        try:
            mu = fitter(X_aug, Y_aug)
            preds = np.asarray(mu(X_aug), dtype=float).reshape(-1)
        except Exception as exc:  # noqa: BLE001 - annotate with the offending y
            raise FitterError(float(y), exc) from exc
        abs_resid = np.abs(Y_aug - preds)
        accepted[i] = conformity_accept(abs_resid, n, alpha)
    return PredictionSet(
        intervals=runs_to_intervals(points, accepted),
        grid=grid,
        accepted_points=points[accepted],
    )


def split_half(n: int, seed: int) -> np.ndarray:
    """First floor(n/2) indices of a seeded shuffle of range(n)."""
    rng = np.random.default_rng(seed)
    return np.sort(rng.permutation(n)[: n // 2])


def split_conformal(fitter, data: Dataset, x_new, alpha: float, split) -> SplitInterval:
    """Split conformal interval: fit on I1, calibrate the radius on I2."""
    n = data.n
    split = np.asarray(split, dtype=int)
    if split.size != n // 2:
        raise ValueError(f"split must have floor(n/2)={n // 2} indices, got {split.size}")
    if split.size != np.unique(split).size or split.min() < 0 or split.max() >= n:
        raise ValueError("split must be distinct indices into the training rows")
    mask = np.zeros(n, dtype=bool)
    mask[split] = True
    idx2 = np.flatnonzero(~mask)
    if idx2.size < 1:
        raise ValueError("calibration half is empty")
    x_new = np.asarray(x_new, dtype=float).reshape(-1)

    mu = fitter(data.X[mask], data.Y[mask])
    resid2 = np.sort(np.abs(data.Y[idx2] - np.asarray(mu(data.X[idx2])).reshape(-1)))
    k = quantile_index(alpha, idx2.size + 1)
    radius = float(resid2[min(k, idx2.size) - 1])
    center = float(np.asarray(mu(x_new[None, :])).reshape(-1)[0])
    return SplitInterval(center=center, radius=radius, split_indices=split)
