"""Fast trim-interval construction: empirical max, closed-form ridge, split lasso.

The ridge path never refits: augmented ridge residuals are affine in the
candidate response, r(y) = u + v*y, so the conformal comparison against
each training residual reduces to a sign analysis of two linear crossings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conformal import quantile_index
from .solvers import Dataset, lasso_fit

MAX_TRIM = "MaxTrim"
RIDGE_TRIM = "RidgeTrim"
SPLIT_TRIM = "SplitTrim"


@dataclass(frozen=True)
class TrimSet:
    """Closed candidate interval [lo, hi] produced by a trimming pass."""

    interval: tuple
    method: str
    alpha_trim: float

    @property
    def lo(self):
        return self.interval[0]

    @property
    def hi(self):
        return self.interval[1]

    @property
    def width(self):
        return self.interval[1] - self.interval[0]

    def contains(self, y) -> bool:
        return self.interval[0] <= y <= self.interval[1]


@dataclass(frozen=True)
class RidgeTrimWork:
    """Intermediates of the ridge trim: residual affine form and per-i bounds.

    components[i] classifies the full solution set of
    |u_last + v_last*y| <= |u_i + v_i*y|; per_i_bounds[i] is the connected
    component containing y_star (endpoints may be +-inf).
    """

    u: np.ndarray
    v: np.ndarray
    y_star: float
    per_i_bounds: list
    components: list


def max_trim(data: Dataset) -> TrimSet:
    """Empirical-range trim [-max|Y|, max|Y|]; miscoverage 1/(n+1)."""
    y_max = float(np.max(np.abs(data.Y)))
    return TrimSet(
        interval=(-y_max, y_max),
        method=MAX_TRIM,
        alpha_trim=1.0 / (data.n + 1),
    )


def _residual_affine(X_aug, Y, rho):
    """u, v with augmented ridge residuals r(y) = u + v*y.

    Kernel form when p > n+1: the residual map is rho*(K + rho*I)^-1.
    """
    m, p = X_aug.shape
    y0 = np.append(Y, 0.0)
    e_last = np.zeros(m)
    e_last[-1] = 1.0
    if p > m:
        gram = X_aug @ X_aug.T + rho * np.eye(m)
        sol = np.linalg.solve(gram, np.column_stack([y0, e_last]))
        u = rho * sol[:, 0]
        v = rho * sol[:, 1]
    else:
        w = X_aug.T @ np.column_stack([y0, e_last])
        coef = np.linalg.solve(X_aug.T @ X_aug + rho * np.eye(p), w)
        u = y0 - X_aug @ coef[:, 0]
        v = e_last - X_aug @ coef[:, 1]
    return u, v


def _classify_component(a, b_, c, d_, y_star):
    """Solution set of |a + b_*y| <= |c + d_*y| with b_ > 0.

    The set is where (c + d_*y)^2 - (a + b_*y)^2 >= 0, a product of the two
    linear factors with roots at the crossing points. Returns one of
    ('interval', lo, hi), ('left', t), ('right', t), ('two', lo, hi), ('full',).
    """
    slope1 = d_ - b_
    slope2 = d_ + b_
    if slope1 != 0.0 and slope2 != 0.0:
        r1 = (a - c) / slope1
        r2 = -(a + c) / slope2
        lo, hi = (r1, r2) if r1 <= r2 else (r2, r1)
        if slope1 * slope2 < 0.0:
            return ("interval", lo, hi)
        if lo == hi:
            return ("full",)
        return ("two", lo, hi)
    if slope1 == 0.0:
        # first factor is the constant c - a
        if c == a:
            return ("full",)
        t = -(a + c) / slope2
        return ("right", t) if c - a > 0 else ("left", t)
    # slope2 == 0: second factor is the constant c + a
    if c + a == 0:
        return ("full",)
    t = (a - c) / slope1
    return ("left", t) if c + a > 0 else ("right", t)


def _component_containing(comp, y_star):
    """Bounds of the connected component of `comp` that contains y_star."""
    kind = comp[0]
    if kind == "interval":
        return comp[1], comp[2]
    if kind == "left":
        return -np.inf, comp[1]
    if kind == "right":
        return comp[1], np.inf
    if kind == "full":
        return -np.inf, np.inf
    lo, hi = comp[1], comp[2]
    if y_star >= hi:
        return hi, np.inf
    if y_star <= lo:
        return -np.inf, lo
    # y_star numerically inside the gap of a near-degenerate pair
    return -np.inf, np.inf


def ridge_trim_work(data: Dataset, x_new, rho: float) -> RidgeTrimWork:
    """Affine residual form and per-training-point comparison sets."""
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    x_new = np.asarray(x_new, dtype=float).reshape(-1)
    if x_new.shape[0] != data.p:
        raise ValueError(f"x_new must have length {data.p}")
    X_aug = np.vstack([data.X, x_new])
    u, v = _residual_affine(X_aug, data.Y, rho)
    a, b_ = u[-1], v[-1]
    if b_ <= 0:
        raise ValueError("degenerate ridge system: test residual has no slope")
    y_star = -a / b_
    components = [_classify_component(a, b_, u[i], v[i], y_star) for i in range(data.n)]
    bounds = [_component_containing(comp, y_star) for comp in components]
    return RidgeTrimWork(u=u, v=v, y_star=float(y_star), per_i_bounds=bounds, components=components)


def _violation_events(comp, y_star):
    """Breakpoints where the violation indicator for one training point flips.

    Returns (right_events, left_events); each event is (position, delta) with
    delta applied to the running violation count when the walk passes it.
    """
    kind = comp[0]
    right, left = [], []
    if kind == "interval":
        right.append((comp[2], +1))
        left.append((comp[1], +1))
    elif kind == "left":
        right.append((comp[1], +1))
    elif kind == "right":
        left.append((comp[1], +1))
    elif kind == "two":
        lo, hi = comp[1], comp[2]
        if y_star >= hi:
            left.append((hi, +1))
            left.append((lo, -1))
        elif y_star <= lo:
            right.append((lo, +1))
            right.append((hi, -1))
    return right, left


def ridge_trim(data: Dataset, x_new, rho: float, alpha_trim: float) -> TrimSet:
    """Closed-form conformal trim interval with the augmented ridge as fast model.

    Walks the crossing points outward from y_star, accumulating how many
    training residuals fall below the test residual; the interval ends where
    that count exceeds the quantile budget. Equals grid-evaluated full
    conformal with the ridge fitter up to grid resolution.
    """
    if not 0 < alpha_trim < 1:
        raise ValueError(f"alpha_trim must be in (0,1), got {alpha_trim}")
    n = data.n
    q = quantile_index(alpha_trim, n + 1)
    if q > n:
        raise ValueError(
            f"alpha_trim={alpha_trim} accepts every candidate (needs alpha_trim >= 1/(n+1))"
        )
    work = ridge_trim_work(data, x_new, rho)
    budget = q - 1

    right_events, left_events = [], []
    for comp in work.components:
        r_ev, l_ev = _violation_events(comp, work.y_star)
        right_events.extend(r_ev)
        left_events.extend(l_ev)

    hi = _walk(right_events, budget, ascending=True)
    lo = _walk(left_events, budget, ascending=False)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError("trim interval is unbounded; data too degenerate to trim")
    return TrimSet(interval=(float(lo), float(hi)), method=RIDGE_TRIM, alpha_trim=float(alpha_trim))


def _walk(events, budget, ascending):
    """First breakpoint past which the violation count exceeds budget."""
    if not events:
        return np.inf if ascending else -np.inf
    events = sorted(events, key=lambda e: e[0], reverse=not ascending)
    count = 0
    i = 0
    while i < len(events):
        pos = events[i][0]
        while i < len(events) and events[i][0] == pos:
            count += events[i][1]
            i += 1
        if count > budget:
            return pos
    return np.inf if ascending else -np.inf


def split_lasso_trim(data: Dataset, x_new, lam: float, alpha_trim: float, split) -> TrimSet:
    """Split conformal trim: lasso on one half, residual quantile on the other."""
    if not 0 < alpha_trim < 1:
        raise ValueError(f"alpha_trim must be in (0,1), got {alpha_trim}")
    n = data.n
    split = np.asarray(split, dtype=int)
    if split.size != n // 2:
        raise ValueError(f"split must have floor(n/2)={n // 2} indices, got {split.size}")
    mask = np.zeros(n, dtype=bool)
    mask[split] = True
    idx2 = np.flatnonzero(~mask)
    x_new = np.asarray(x_new, dtype=float).reshape(-1)

    fit = lasso_fit(Dataset(data.X[mask], data.Y[mask]), lam)
    resid2 = np.sort(np.abs(data.Y[idx2] - data.X[idx2] @ fit.beta))
    k = quantile_index(alpha_trim, idx2.size + 1)
    radius = float(resid2[min(k, idx2.size) - 1])
    center = float(x_new @ fit.beta)
    return TrimSet(
        interval=(center - radius, center + radius),
        method=SPLIT_TRIM,
        alpha_trim=float(alpha_trim),
    )
