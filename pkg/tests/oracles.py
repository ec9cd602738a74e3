"""Independent reference implementations used only to check the library.

Nothing here shares code paths with trimcp: the lasso oracle is an
accelerated proximal-gradient loop, ranks come from a stable sort, and the
conformal oracles refit from scratch at every candidate point.
"""

import numpy as np


def prox_grad_lasso(X, Y, lam, n_iter=20000, tol=1e-12):
    """FISTA for 0.5*||Y - X b||^2 + lam*||b||_1, run to high precision."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    L = np.linalg.norm(X, ord=2) ** 2
    if L == 0:
        return np.zeros(p)
    step = 1.0 / L
    beta = np.zeros(p)
    z = beta.copy()
    t = 1.0
    for _ in range(n_iter):
        grad = X.T @ (X @ z - Y)
        w = z - step * grad
        new = np.sign(w) * np.maximum(np.abs(w) - step * lam, 0.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = new + ((t - 1.0) / t_new) * (new - beta)
        if np.max(np.abs(new - beta)) < tol:
            beta = new
            break
        beta, t = new, t_new
    return beta


def lasso_objective(X, Y, beta, lam):
    r = Y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def stable_rank(values, test_index):
    """1-based rank by value with ties broken by original position."""
    order = np.argsort(np.asarray(values), kind="stable")
    return int(np.flatnonzero(order == test_index)[0]) + 1


def quantile_level_exact(alpha, m):
    """Exact ceil((1-alpha)*m) via integer-friendly arithmetic, clamped."""
    import math

    k = math.ceil((1.0 - alpha) * m - 1e-9)
    return min(max(k, 1), m)


def brute_conformal_accept(X, Y, x_new, y, alpha, fit_beta):
    """Refit-from-scratch acceptance of one candidate y.

    fit_beta maps (X_aug, Y_aug) to a coefficient vector.
    """
    X_aug = np.vstack([X, x_new])
    Y_aug = np.append(Y, y)
    beta = fit_beta(X_aug, Y_aug)
    resid = np.abs(Y_aug - X_aug @ beta)
    m = resid.shape[0]
    rank = stable_rank(resid, m - 1)
    return rank <= quantile_level_exact(alpha, m)


def ridge_beta(X, Y, rho):
    p = X.shape[1]
    return np.linalg.solve(X.T @ X + rho * np.eye(p), X.T @ Y)


def split_set_definition(mu_center, calib_abs_resid, y_grid, alpha):
    """Membership of each grid y per the set form of the split interval.

    Accepts y when |y - center| ranks within the bottom 1-alpha quantile of
    the calibration residuals plus itself (test entry last).
    """
    accepted = []
    resid = np.asarray(calib_abs_resid, dtype=float)
    for y in y_grid:
        scores = np.append(resid, abs(y - mu_center))
        m = scores.shape[0]
        if stable_rank(scores, m - 1) <= quantile_level_exact(alpha, m):
            accepted.append(y)
    return np.asarray(accepted)
