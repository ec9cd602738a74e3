"""Base regression fitters: closed-form ridge and coordinate-descent lasso.

Both solvers operate on a raw design matrix: no intercept, no column
standardization. Callers that want centered columns must preprocess.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SUPPORT_TOL = 1e-12  # |beta_j| above this counts as active


class ConvergenceError(RuntimeError):
    """Coordinate descent ran out of sweeps; carries the last iterate."""

    def __init__(self, message, fit):
        super().__init__(message)
        self.fit = fit


@dataclass(frozen=True)
class Dataset:
    """Training sample: X is n x p, Y has length n."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-d, got shape {X.shape}")
        if Y.ndim != 1:
            raise ValueError(f"Y must be 1-d, got shape {Y.shape}")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but Y has length {Y.shape[0]}")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise ValueError(f"need n >= 2 and p >= 1, got {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("non-finite entries in data")
        X = X.copy()
        Y = Y.copy()
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class RidgeFit:
    beta: np.ndarray
    rho: float


@dataclass(frozen=True)
class LassoFit:
    """Lasso solution with its signed support.

    support holds the active indices in ascending order; signs holds the
    matching +/-1 entries. sweep_objectives records the penalized objective
    after each coordinate-descent sweep (used by monotonicity checks).
    """

    beta: np.ndarray
    lam: float
    support: np.ndarray
    signs: np.ndarray
    objective: float
    n_sweeps: int = 0
    sweep_objectives: np.ndarray = field(default=None, repr=False)

    def predict(self, X):
        return np.asarray(X, dtype=float) @ self.beta


def ridge_fit(data: Dataset, rho: float) -> RidgeFit:
    """Solve the ridge normal equations (X'X + rho*I) beta = X'Y.

    Uses the n x n kernel form when p > n; identical result by the
    push-through identity, cheaper in the wide regime.
    """
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    X, Y = data.X, data.Y
    n, p = X.shape
    if p > n:
        alpha = np.linalg.solve(X @ X.T + rho * np.eye(n), Y)
        beta = X.T @ alpha
    else:
        beta = np.linalg.solve(X.T @ X + rho * np.eye(p), X.T @ Y)
    return RidgeFit(beta=beta, rho=float(rho))


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_objective(X, Y, beta, lam):
    r = Y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def _cd_sweep(X, r, beta, lam, col_sq, order):
    """One pass of exact coordinate minimization over `order`; returns max |delta|."""
    max_delta = 0.0
    for j in order:
        cj = col_sq[j]
        if cj <= 0.0:
            continue
        old = beta[j]
        z = X[:, j] @ r + cj * old
        new = soft_threshold(z, lam) / cj
        if new != old:
            r += X[:, j] * (old - new)
            beta[j] = new
            delta = abs(new - old)
            if delta > max_delta:
                max_delta = delta
    return max_delta


def _signed_support(beta):
    support = np.flatnonzero(np.abs(beta) > SUPPORT_TOL)
    signs = np.sign(beta[support]).astype(int)
    return support, signs


def _polish_active(X, Y, beta, lam):
    """Exact solve on the detected signed support.

    Coordinate descent stops at a coefficient-change tolerance; the closed-form
    solve on (M, s) removes the residual solver error so downstream polyhedral
    checks see an exact KKT point. Returns None when the support is rank
    deficient or the polished point is inconsistent with (M, s).
    """
    support, signs = _signed_support(beta)
    if support.size == 0:
        return np.zeros_like(beta)
    XM = X[:, support]
    gram = XM.T @ XM
    try:
        if np.linalg.cond(gram) > 1e12:
            return None
        beta_m = np.linalg.solve(gram, XM.T @ Y - lam * signs)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.sign(beta_m).astype(int) != signs):
        return None
    polished = np.zeros_like(beta)
    polished[support] = beta_m
    r = Y - XM @ beta_m
    corr = np.abs(X.T @ r)
    corr[support] = 0.0
    if corr.size and corr.max() > lam * (1 + 1e-9) + 1e-9:
        return None
    return polished


def lasso_fit(
    data: Dataset,
    lam: float,
    tol: float = 1e-7,
    max_iter: int | None = None,
    beta0: np.ndarray | None = None,
) -> LassoFit:
    """Minimize 0.5*||Y - X beta||^2 + lam*||beta||_1 by cyclic coordinate descent.

    Converged when the largest absolute coefficient change in a full sweep
    is <= tol. Active-set sweeps run between full sweeps for speed; a final
    closed-form polish on the detected signed support tightens the KKT
    residual when the support is stable. Raises ConvergenceError (carrying
    the last iterate) if max_iter sweeps are exhausted.
    """
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    X, Y = data.X, data.Y
    n, p = X.shape
    if max_iter is None:
        # floor keeps near-collinear small-p fits from stalling out
        max_iter = max(2000, 100 * p)
    if max_iter <= 0:
        raise ValueError(f"max_iter must be positive, got {max_iter}")

    if beta0 is None:
        beta = np.zeros(p)
        r = Y.copy()
    else:
        beta = np.array(beta0, dtype=float, copy=True)
        if beta.shape != (p,):
            raise ValueError(f"beta0 must have shape ({p},)")
        r = Y - X @ beta
    col_sq = np.einsum("ij,ij->j", X, X)
    all_coords = np.arange(p)

    sweep_obj = []
    sweeps = 0
    converged = False
    while sweeps < max_iter:
        max_delta = _cd_sweep(X, r, beta, lam, col_sq, all_coords)
        sweeps += 1
        sweep_obj.append(0.5 * float(r @ r) + lam * float(np.abs(beta).sum()))
        if max_delta <= tol:
            converged = True
            break
        # inner sweeps restricted to the current active set
        active = np.flatnonzero(np.abs(beta) > SUPPORT_TOL)
        while active.size and sweeps < max_iter:
            inner_delta = _cd_sweep(X, r, beta, lam, col_sq, active)
            sweeps += 1
            sweep_obj.append(0.5 * float(r @ r) + lam * float(np.abs(beta).sum()))
            if inner_delta <= tol:
                break

    def build(beta_vec):
        support, signs = _signed_support(beta_vec)
        return LassoFit(
            beta=beta_vec,
            lam=float(lam),
            support=support,
            signs=signs,
            objective=lasso_objective(X, Y, beta_vec, lam),
            n_sweeps=sweeps,
            sweep_objectives=np.asarray(sweep_obj),
        )

    if not converged:
        raise ConvergenceError(
            f"lasso coordinate descent did not converge in {max_iter} sweeps "
            f"(last max coefficient change > {tol})",
            build(beta),
        )

    if lam > 0:
        polished = _polish_active(X, Y, beta, lam)
        if polished is not None:
            beta = polished
    return build(beta)


def kkt_check(data: Dataset, fit: LassoFit, tol: float) -> bool:
    """Stationarity test: active gradients equal lam*sign, inactive within lam."""
    X, Y = data.X, data.Y
    beta = fit.beta
    if beta.shape != (data.p,):
        raise ValueError(f"fit.beta must have length {data.p}")
    grad = X.T @ (Y - X @ beta)
    active = np.abs(beta) > SUPPORT_TOL
    if np.any(np.abs(grad[active] - fit.lam * np.sign(beta[active])) > tol):
        return False
    return not np.any(np.abs(grad[~active]) > fit.lam + tol)


def make_ridge_fitter(rho: float):
    """Ridge as a conformal fitter: (X, Y) -> prediction function."""

    def fitter(X, Y):
        fit = ridge_fit(Dataset(X, Y), rho)
        return lambda Xq: np.atleast_2d(np.asarray(Xq, dtype=float)) @ fit.beta

    return fitter


def make_lasso_fitter(lam: float, tol: float = 1e-7, max_iter: int | None = None):
    """Lasso as a conformal fitter: (X, Y) -> prediction function."""

    def fitter(X, Y):
        fit = lasso_fit(Dataset(X, Y), lam, tol=tol, max_iter=max_iter)
        return lambda Xq: np.atleast_2d(np.asarray(Xq, dtype=float)) @ fit.beta

    return fitter


def zero_fitter(X, Y):
    """Predicts zero everywhere; the degenerate fast model."""
    return lambda Xq: np.zeros(np.atleast_2d(Xq).shape[0])
