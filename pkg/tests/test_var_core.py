"""
Tests for VAR estimation, the Cholesky factor and moving-average coefficients.
"""

import json
import math

import numpy as np
import pytest

from tax_favar.core.errors import VarError
from tax_favar.core.tools.var_core import (
    cholesky_factor,
    exogenous_irf,
    fit_var,
    lag_design,
    reduced_form_irf,
    save_var_manifest,
    simulate_var,
    var_data_ids,
)

from conftest import make_var_model


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky_factor(np.eye(3)), np.eye(3))

    def test_two_by_two(self):
        L = cholesky_factor(np.array([[4.0, 2.0], [2.0, 3.0]]))
        np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, math.sqrt(2.0)]], atol=1e-12)

    def test_not_positive_definite(self):
        with pytest.raises(VarError, match="not positive definite") as info:
            cholesky_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert info.value.smallest_eigenvalue == pytest.approx(-1.0)

    def test_asymmetric(self):
        with pytest.raises(VarError, match="symmetric"):
            cholesky_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestFitVar:
    def test_recovers_coefficients(self, known_var1):
        np.testing.assert_allclose(known_var1.coeffs[0], [[0.5, 0.1], [0.0, 0.3]], atol=0.03)
        assert known_var1.is_stable

    def test_white_noise_coefficients_insignificant(self, rng):
        data = rng.standard_normal((400, 2))
        model = fit_var(data, 2)
        Z = lag_design(data, 2)
        se = np.sqrt(np.outer(np.diag(model.sigma_u), np.diag(np.linalg.inv(Z.T @ Z))))
        B = np.column_stack([model.intercept, model.coeffs[0], model.coeffs[1]])
        assert np.all(np.abs(B) < 3.5 * se)

    def test_sigma_uses_t_minus_p(self, known_var1):
        resid = known_var1.residuals
        T = known_var1.data.shape[0]
        np.testing.assert_allclose(known_var1.sigma_u, resid.T @ resid / (T - 1), rtol=1e-12)
        np.testing.assert_allclose(known_var1.chol @ known_var1.chol.T, known_var1.sigma_u, atol=1e-8)

    def test_residuals_orthogonal_to_regressors(self, rng):
        data = np.cumsum(rng.standard_normal((150, 3)), axis=0) * 0.1 + rng.standard_normal((150, 3))
        model = fit_var(data, 3)
        Z = lag_design(data, 3)
        assert np.max(np.abs(Z.T @ model.residuals)) / np.max(np.abs(Z)) < 1e-6

    def test_too_few_observations(self, rng):
        with pytest.raises(VarError, match="needs T"):
            fit_var(rng.standard_normal((4, 2)), 2)

    def test_non_finite(self, rng):
        data = rng.standard_normal((50, 2))
        data[10, 1] = np.inf
        with pytest.raises(VarError, match="finite"):
            fit_var(data, 1)

    def test_rank_deficient(self, rng):
        x = rng.standard_normal(60)
        with pytest.raises(VarError, match="rank deficient"):
            fit_var(np.column_stack([x, 2.0 * x]), 1)

    def test_exogenous_regressor(self, rng):
        T = 3000
        x = rng.standard_normal(T)
        y = np.zeros((T, 2))
        for t in range(1, T):
            y[t] = 0.4 * y[t - 1] + np.array([-0.7, 0.3]) * x[t] + rng.standard_normal(2)
        model = fit_var(y, 1, exog=x, exog_ids=["PIT"])
        np.testing.assert_allclose(model.exog_coeffs[:, 0], [-0.7, 0.3], atol=0.05)
        response = exogenous_irf(model, 0, 5, size=2.0)
        np.testing.assert_allclose(response[0], 2.0 * model.exog_coeffs[:, 0])
        np.testing.assert_allclose(response[1], model.coeffs[0] @ response[0])

    def test_exogenous_irf_needs_regressors(self, known_var1):
        with pytest.raises(VarError, match="no exogenous"):
            exogenous_irf(known_var1, 0, 4)


class TestReducedFormIrf:
    def test_geometric_decay(self):
        psi = reduced_form_irf(make_var_model([[0.5]]), 6)
        np.testing.assert_allclose(psi[:, 0, 0], 0.5 ** np.arange(7))

    def test_zero_coefficients(self):
        psi = reduced_form_irf(make_var_model(np.zeros((2, 2))), 3)
        np.testing.assert_array_equal(psi[0], np.eye(2))
        assert not psi[1:].any()

    def test_matches_simulation(self):
        coeffs = np.array([[[0.5, 0.2], [-0.1, 0.4]], [[0.1, 0.0], [0.05, -0.2]]])
        model = make_var_model(coeffs)
        psi = reduced_form_irf(model, 10)
        for j in range(2):
            innovations = np.zeros((11, 2))
            innovations[0, j] = 1.0
            path = simulate_var(model, innovations, np.zeros((2, 2)), include_intercept=False)
            np.testing.assert_allclose(path[2:], psi[:, :, j], atol=1e-10)

    def test_negative_horizon(self, known_var1):
        with pytest.raises(VarError):
            reduced_form_irf(known_var1, -1)


class TestManifestAndOrdering:
    def test_manifest_contents(self, known_var1, tmp_path):
        dumped = json.loads(save_var_manifest(known_var1, tmp_path / "var.json").read_text())
        assert dumped["var_ids"] == ["y1", "y2"]
        assert dumped["p"] == 1
        assert dumped["sigma_u_denominator"] == "T - p"
        np.testing.assert_allclose(dumped["chol"], known_var1.chol)

    def test_ordering(self):
        ids = var_data_ids(["GDP", "CPI"], ["F1", "F2"], ["PIT", "CIT"], exogenous_taxes=False)
        assert ids == ["GDP", "CPI", "F1", "F2", "PIT", "CIT"]
        assert var_data_ids(["GDP"], ["F1"], ["PIT"], exogenous_taxes=True) == ["GDP", "F1"]
