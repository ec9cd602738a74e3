import numpy as np
import pytest

from oracles import lasso_objective, prox_grad_lasso
from trimcp.solvers import (
    ConvergenceError,
    Dataset,
    kkt_check,
    lasso_fit,
    ridge_fit,
)

# objective of the pinned 20x5 / lam=1 instance, computed by the FISTA oracle
FROZEN_LASSO_OBJECTIVE = 14.344374625272392


def _pinned_instance():
    rng = np.random.default_rng(20250501)
    X = rng.standard_normal((20, 5))
    Y = X @ np.array([1.5, 0.0, -2.0, 0.0, 0.5]) + rng.standard_normal(20)
    return Dataset(X, Y)


class TestDataset:
    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.zeros(4))

    def test_non_finite(self):
        X = np.zeros((3, 2))
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            Dataset(X, np.zeros(3))

    def test_too_small(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((1, 2)), np.zeros(1))

    def test_immutable(self):
        data = Dataset(np.ones((3, 2)), np.ones(3))
        with pytest.raises(ValueError):
            data.X[0, 0] = 5.0


class TestRidge:
    def test_identity_design(self):
        # (I + I)^-1 Y = Y/2
        data = Dataset(np.eye(2), np.array([3.0, 4.0]))
        fit = ridge_fit(data, 1.0)
        np.testing.assert_allclose(fit.beta, [1.5, 2.0], rtol=1e-12)

    def test_infinite_penalty_kills_coefficients(self):
        data = Dataset(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]))
        assert abs(ridge_fit(data, 1e12).beta[0]) < 1e-10

    def test_wide_matches_dense_normal_equations(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((10, 20))
        Y = rng.standard_normal(10)
        fit = ridge_fit(Dataset(X, Y), 0.7)
        dense = np.linalg.solve(X.T @ X + 0.7 * np.eye(20), X.T @ Y)
        np.testing.assert_allclose(fit.beta, dense, rtol=1e-8, atol=1e-12)

    def test_kernel_primal_agree(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((8, 25))
        Y = rng.standard_normal(8)
        wide = ridge_fit(Dataset(X, Y), 0.3).beta
        # force the primal path by padding with zero rows
        Xp = np.vstack([X, np.zeros((20, 25))])
        Yp = np.append(Y, np.zeros(20))
        tall = ridge_fit(Dataset(Xp, Yp), 0.3).beta
        np.testing.assert_allclose(wide, tall, rtol=1e-8, atol=1e-12)

    def test_norm_shrinks_with_rho(self):
        rng = np.random.default_rng(5)
        data = Dataset(rng.standard_normal((15, 6)), rng.standard_normal(15))
        norms = [np.linalg.norm(ridge_fit(data, rho).beta) for rho in [0.1, 1.0, 10.0, 100.0]]
        assert all(a >= b for a, b in zip(norms, norms[1:]))

    def test_rejects_nonpositive_rho(self):
        data = Dataset(np.eye(2), np.ones(2))
        with pytest.raises(ValueError):
            ridge_fit(data, 0.0)


class TestLasso:
    def test_unpenalized_equals_least_squares(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((30, 4))
        Y = rng.standard_normal(30)
        fit = lasso_fit(Dataset(X, Y), 0.0)
        ols, *_ = np.linalg.lstsq(X, Y, rcond=None)
        np.testing.assert_allclose(fit.beta, ols, atol=1e-6)

    def test_critical_penalty_gives_zero(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((10, 3))
        Y = rng.standard_normal(10)
        lam = np.abs(X.T @ Y).max()
        fit = lasso_fit(Dataset(X, Y), lam)
        assert np.all(fit.beta == 0.0)
        assert fit.support.size == 0
        # both fits above the critical penalty are exactly zero
        assert np.all(lasso_fit(Dataset(X, Y), 2 * lam).beta == 0.0)

    def test_objective_matches_prox_oracle(self):
        data = _pinned_instance()
        fit = lasso_fit(data, 1.0)
        assert fit.objective <= FROZEN_LASSO_OBJECTIVE + 1e-6
        assert abs(fit.objective - FROZEN_LASSO_OBJECTIVE) < 1e-6

    @pytest.mark.parametrize("seed", range(8))
    def test_random_instances_vs_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(10, 40))
        p = int(rng.integers(2, 25))
        X = rng.standard_normal((n, p))
        Y = rng.standard_normal(n) * 2.0
        lam = 0.5 * np.abs(X.T @ Y).max() * rng.uniform(0.1, 1.0)
        data = Dataset(X, Y)
        fit = lasso_fit(data, lam)
        oracle = prox_grad_lasso(X, Y, lam)
        assert fit.objective <= lasso_objective(X, Y, oracle, lam) + 1e-6
        assert kkt_check(data, fit, 1e-6)

    def test_objective_non_increasing_per_sweep(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((25, 12))
        Y = rng.standard_normal(25)
        fit = lasso_fit(Dataset(X, Y), 1.5)
        diffs = np.diff(fit.sweep_objectives)
        assert np.all(diffs <= 1e-10)

    def test_kkt_at_ten_tol(self):
        rng = np.random.default_rng(9)
        for seed in range(5):
            r = np.random.default_rng(seed)
            X = r.standard_normal((20, 8))
            Y = r.standard_normal(20)
            data = Dataset(X, Y)
            fit = lasso_fit(data, 1.0, tol=1e-7)
            assert kkt_check(data, fit, 1e-6)

    def test_signed_support_consistency(self):
        data = _pinned_instance()
        fit = lasso_fit(data, 1.0)
        assert np.all(fit.beta[fit.support] != 0)
        np.testing.assert_array_equal(np.sign(fit.beta[fit.support]), fit.signs)
        off = np.setdiff1d(np.arange(data.p), fit.support)
        assert np.all(fit.beta[off] == 0)

    def test_convergence_error_carries_iterate(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((30, 10))
        Y = rng.standard_normal(30) * 10
        with pytest.raises(ConvergenceError) as err:
            lasso_fit(Dataset(X, Y), 0.01, tol=1e-14, max_iter=2)
        assert err.value.fit.beta.shape == (10,)

    def test_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            lasso_fit(Dataset(np.eye(2), np.ones(2)), -1.0)


class TestKktCheck:
    def test_zero_beta_at_critical_lambda(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((10, 4))
        Y = rng.standard_normal(10)
        data = Dataset(X, Y)
        lam = np.abs(X.T @ Y).max()
        fit = lasso_fit(data, lam)
        assert np.all(fit.beta == 0)
        assert kkt_check(data, fit, 1e-10)

    def test_converged_fit_passes(self):
        data = _pinned_instance()
        fit = lasso_fit(data, 1.0)
        assert kkt_check(data, fit, 1e-4)

    def test_perturbed_fit_fails(self):
        from dataclasses import replace

        data = _pinned_instance()
        fit = lasso_fit(data, 1.0)
        beta = fit.beta.copy()
        beta[fit.support[0]] += 1.0
        assert not kkt_check(data, replace(fit, beta=beta), 1e-4)
