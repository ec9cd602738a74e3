"""Signed-support regions for conformal lasso: one fit serves a whole y-interval.

For a fixed signed support (M, s) the lasso solution on the augmented sample
is affine in the candidate response y, and the set of y values that keep
(M, s) optimal is a polyhedron in the stacked response vector. Scanning a
grid left to right therefore needs a solver call only when the support
changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conformal import CandidateGrid
from .solvers import Dataset, LassoFit, kkt_check, lasso_fit

GRAM_COND_LIMIT = 1e12
BOUNDARY_MARGIN = 1e-10  # grid points this close to a bound force a refit


class RankError(np.linalg.LinAlgError):
    """Active-set Gram matrix is singular or near-singular."""


@dataclass(frozen=True)
class SupportRegion:
    """Polyhedral region of candidate responses sharing one signed support."""

    support: np.ndarray
    signs: np.ndarray
    A: np.ndarray
    b: np.ndarray
    c_bound: float
    d_bound: float
    resid_offset: np.ndarray
    resid_slope: np.ndarray

    def abs_residuals(self, y: float) -> np.ndarray:
        return np.abs(self.resid_offset - self.resid_slope * y)


@dataclass
class ScanStats:
    """Solver-call bookkeeping for one grid scan."""

    n_full_solves: int = 0
    n_shortcut_updates: int = 0
    n_fast_evals: int = 0
    n_region_failures: int = 0
    region_signatures: list = field(default_factory=list)


@dataclass(frozen=True)
class ScanResult:
    points: np.ndarray
    residuals: np.ndarray  # len(points) x (n+1), absolute values
    stats: ScanStats

    def __iter__(self):
        return ((float(y), self.residuals[i]) for i, y in enumerate(self.points))

    def __len__(self):
        return self.points.shape[0]


def _gram_solve_t(X_M):
    """(X_M' X_M)^-1 X_M' with a conditioning guard."""
    gram = X_M.T @ X_M
    if gram.shape[0] and np.linalg.cond(gram) > GRAM_COND_LIMIT:
        raise RankError("active-set Gram matrix is near-singular")
    try:
        return gram, np.linalg.solve(gram, X_M.T)
    except np.linalg.LinAlgError as exc:
        raise RankError("active-set Gram matrix is singular") from exc


def build_constraints(Xfull, support, signs, lam: float):
    """Affine description A @ [Y, y] <= b of the signed-support region.

    Rows are, in order: upper and lower correlation bounds for each inactive
    feature, then one sign constraint per active feature.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    Xfull = np.asarray(Xfull, dtype=float)
    m_rows, p = Xfull.shape
    support = np.asarray(support, dtype=int)
    signs = np.asarray(signs, dtype=float)
    rest = np.setdiff1d(np.arange(p), support, assume_unique=False)
    X_M = Xfull[:, support]
    X_R = Xfull[:, rest]

    if support.size:
        gram, ginv_xt = _gram_solve_t(X_M)
        proj_rest = X_R.T - (X_R.T @ X_M) @ ginv_xt  # X_R'(I - P_M)
        ginv_s = np.linalg.solve(gram, signs)
        corr = X_R.T @ (X_M @ ginv_s)
        A1 = -signs[:, None] * ginv_xt
        b1 = -lam * signs * ginv_s
    else:
        proj_rest = X_R.T
        corr = np.zeros(rest.size)
        A1 = np.empty((0, m_rows))
        b1 = np.empty(0)

    A0 = np.vstack([proj_rest, -proj_rest]) / lam
    b0 = np.concatenate([1.0 - corr, 1.0 + corr])
    return np.vstack([A0, A1]), np.concatenate([b0, b1])


def region_bounds(A, b, Y):
    """Interval of y keeping A @ [Y, y] <= b feasible; (c, d) with c > d when empty."""
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if A.shape[1] != n + 1:
        raise ValueError(f"A must have {n + 1} columns, got {A.shape[1]}")
    slack = b - A[:, :n] @ Y
    a_last = A[:, n]
    zero = a_last == 0.0
    if np.any(slack[zero] < -1e-10):
        return np.inf, -np.inf
    neg = a_last < 0.0
    pos = a_last > 0.0
    c = np.max(slack[neg] / a_last[neg]) if np.any(neg) else -np.inf
    d = np.min(slack[pos] / a_last[pos]) if np.any(pos) else np.inf
    return float(c), float(d)


def residual_linearization(Xfull, Y, support, signs, lam: float):
    """(offset, slope) with augmented absolute lasso residuals |offset - slope*y|."""
    Xfull = np.asarray(Xfull, dtype=float)
    Y = np.asarray(Y, dtype=float)
    m_rows = Xfull.shape[0]
    support = np.asarray(support, dtype=int)
    signs = np.asarray(signs, dtype=float)
    e_last = np.zeros(m_rows)
    e_last[-1] = 1.0
    y0 = np.append(Y, 0.0)
    if support.size == 0:
        return y0, -e_last
    X_M = Xfull[:, support]
    gram, ginv_xt = _gram_solve_t(X_M)
    fit_const = X_M @ (ginv_xt[:, :-1] @ Y - lam * np.linalg.solve(gram, signs))
    fit_slope = X_M @ ginv_xt[:, -1]
    return y0 - fit_const, fit_slope - e_last


def _closed_form_beta(Xfull, Y_aug, support, signs, lam, p):
    """Exact lasso solution for a known signed support; None if inconsistent."""
    X_M = Xfull[:, support]
    gram = X_M.T @ X_M
    if support.size and np.linalg.cond(gram) > GRAM_COND_LIMIT:
        return None
    beta = np.zeros(p)
    if support.size:
        beta_m = np.linalg.solve(gram, X_M.T @ Y_aug - lam * signs)
        if np.any(np.sign(beta_m) != signs):
            return None
        beta[support] = beta_m
    return beta


def _shortcut_support(support, signs, row, rest):
    """New (M, s) when exactly the given constraint row is crossed."""
    k = rest.size
    if row < 2 * k:
        j = rest[row % k]
        sign = 1 if row < k else -1
        pos = int(np.searchsorted(support, j))
        return np.insert(support, pos, j), np.insert(signs, pos, sign)
    drop = row - 2 * k
    return np.delete(support, drop), np.delete(signs, drop)


def _try_region(Xfull, Y, y, lam, support, signs, stats):
    """Build and validate the region around a fitted point; None on failure."""
    try:
        A, b = build_constraints(Xfull, support, signs, lam)
    except RankError:
        stats.n_region_failures += 1
        return None
    vals = A[:, :-1] @ Y + A[:, -1] * y
    if np.any(vals > b + 1e-6 * (1.0 + np.abs(b))):
        # closed-form transcription disagrees with the fit; fall back to refits
        stats.n_region_failures += 1
        return None
    c, d = region_bounds(A, b, Y)
    if not (c - BOUNDARY_MARGIN <= y <= d + BOUNDARY_MARGIN):
        stats.n_region_failures += 1
        return None
    try:
        offset, slope = residual_linearization(Xfull, Y, support, signs, lam)
    except RankError:
        stats.n_region_failures += 1
        return None
    return SupportRegion(
        support=support,
        signs=signs,
        A=A,
        b=b,
        c_bound=c,
        d_bound=d,
        resid_offset=offset,
        resid_slope=slope,
    )


def region_scan(
    data: Dataset,
    x_new,
    lam: float,
    grid: CandidateGrid,
    tol: float = 1e-7,
    max_iter: int | None = None,
) -> ScanResult:
    """Absolute augmented-lasso residuals at every grid point.

    Inside the current region residuals come from the affine form; leaving it
    triggers a refit. When exactly one region constraint is violated the new
    signed support is known and the closed-form solution is used, guarded by
    a KKT check; otherwise the full solver runs (warm-started).
    """
    x_new = np.asarray(x_new, dtype=float).reshape(-1)
    if x_new.shape[0] != data.p:
        raise ValueError(f"x_new must have length {data.p}")
    points = grid.points()
    if points.size == 0:
        raise ValueError("empty candidate grid")
    Xfull = np.vstack([data.X, x_new])
    Y = data.Y
    n, p = data.n, data.p
    stats = ScanStats()
    residuals = np.empty((points.size, n + 1))

    region = None
    base = None  # A[:, :n] @ Y cached per region
    beta_warm = None
    kkt_tol = 1e-6 * max(1.0, lam)

    for gi, y in enumerate(points):
        if region is not None and (
            region.c_bound + BOUNDARY_MARGIN < y < region.d_bound - BOUNDARY_MARGIN
        ):
            residuals[gi] = region.abs_residuals(y)
            stats.n_fast_evals += 1
            continue

        Y_aug = np.append(Y, y)
        aug = Dataset(Xfull, Y_aug)
        beta = None
        support = signs = None

        if region is not None and lam > 0:
            vals = base + region.A[:, -1] * y
            violated = np.flatnonzero(vals > region.b + 1e-8 * (1.0 + np.abs(region.b)))
            if violated.size == 1:
                rest = np.setdiff1d(np.arange(p), region.support)
                cand_support, cand_signs = _shortcut_support(
                    region.support, region.signs, int(violated[0]), rest
                )
                cand_beta = _closed_form_beta(Xfull, Y_aug, cand_support, cand_signs, lam, p)
                if cand_beta is not None:
                    cand_fit = LassoFit(
                        beta=cand_beta,
                        lam=lam,
                        support=cand_support,
                        signs=cand_signs.astype(int),
                        objective=0.0,
                    )
                    if kkt_check(aug, cand_fit, kkt_tol):
                        beta, support, signs = cand_beta, cand_support, cand_signs
                        stats.n_shortcut_updates += 1

        if beta is None:
            try:
                fit = lasso_fit(aug, lam, tol=tol, max_iter=max_iter, beta0=beta_warm)
            except Exception as exc:
                raise RuntimeError(f"lasso solve failed at grid point y={y}") from exc
            beta, support, signs = fit.beta, fit.support, fit.signs.astype(float)
            stats.n_full_solves += 1

        residuals[gi] = np.abs(Y_aug - Xfull @ beta)
        beta_warm = beta
        region = _try_region(Xfull, Y, y, lam, support, signs, stats) if lam > 0 else None
        if region is not None:
            base = region.A[:, :-1] @ Y
            stats.region_signatures.append(
                (tuple(int(j) for j in support), tuple(int(v) for v in signs))
            )

    return ScanResult(points=points, residuals=residuals, stats=stats)
