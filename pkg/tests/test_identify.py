"""
Tests for sign-restricted identification of the tax shock.
"""

import numpy as np
import pytest

from tax_favar.core.errors import IdentificationError
from tax_favar.core.models.var_models import IdentificationMode, Sign, SignRestrictionSpec
from tax_favar.core.tools.identify import (
    build_spec,
    draw_candidate,
    evaluate_restrictions,
    identify_tax_shock,
    impulse_from_rotation,
    orient,
    polish_rotation,
    restriction_scales,
)
from tax_favar.core.tools.var_core import fit_var, reduced_form_irf

from conftest import make_var_model, simulate_var1

VAR_IDS = ["GDP", "CPI", "PIT"]
COEFFS = np.array([[0.5, 0.1, -0.2], [0.05, 0.6, 0.1], [0.1, 0.0, 0.3]])
SIGMA = np.array([[1.0, 0.3, -0.2], [0.3, 0.8, 0.1], [-0.2, 0.1, 0.5]])


@pytest.fixture
def model():
    return make_var_model(COEFFS, SIGMA, VAR_IDS)


@pytest.fixture
def spec():
    return build_spec(VAR_IDS, "PIT", {"GDP": "+", "CPI": "+"}, horizon=2)


class TestPenalty:
    def _spec(self, signs, horizon=2):
        return SignRestrictionSpec(
            var_ids=["PIT", "A", "B", "C"],
            signs={k: Sign.parse(v) for k, v in signs.items()},
            shock_var="PIT",
            horizon=horizon,
        )

    def test_conforming_cells_count_minus_one(self):
        spec = self._spec({"A": "+"})
        irf = np.zeros((3, 4))
        irf[:, 1] = 2.0
        meets, penalty = evaluate_restrictions(irf, spec, np.array([1.0, 2.0, 1.0, 1.0]))
        assert meets
        assert penalty == pytest.approx(-3.0)

    def test_violation_costs_slope(self):
        spec = self._spec({"A": "+"})
        irf = np.zeros((3, 4))
        irf[:, 1] = [2.0, -2.0, 2.0]
        meets, penalty = evaluate_restrictions(irf, spec, np.array([1.0, 2.0, 1.0, 1.0]))
        assert not meets
        assert penalty == pytest.approx(-1.0 + 100.0 - 1.0)

    def test_mixed_grid_hand_sum(self):
        spec = self._spec({"A": "+", "B": "-", "C": "+"})
        irf = np.zeros((3, 4))
        irf[:, 1] = [1.0, -0.5, 2.0]
        irf[:, 2] = [-1.0, 0.2, -0.3]
        irf[:, 3] = [0.5, 0.25, -0.1]
        meets, penalty = evaluate_restrictions(irf, spec, np.array([1.0, 1.0, 1.0, 0.5]))
        # A: -1 + 50 - 2; B: -1 + 20 - 0.3; C: -1 - 0.5 + 20
        assert not meets
        assert penalty == pytest.approx(84.2)

    def test_only_horizons_through_k_count(self):
        spec = self._spec({"A": "+"}, horizon=1)
        irf = np.ones((5, 4))
        irf[3:, 1] = -1.0
        meets, penalty = evaluate_restrictions(irf, spec, np.ones(4))
        assert meets
        assert penalty == pytest.approx(-2.0)

    def test_zero_scale(self):
        spec = self._spec({"A": "+"})
        with pytest.raises(IdentificationError, match="positive"):
            evaluate_restrictions(np.ones((3, 4)), spec, np.array([1.0, 0.0, 1.0, 1.0]))

    def test_short_responses(self):
        spec = self._spec({"A": "+"}, horizon=4)
        with pytest.raises(IdentificationError, match="horizons"):
            evaluate_restrictions(np.ones((3, 4)), spec, np.ones(4))

    def test_scale_free(self, model, spec):
        D = np.diag([10.0, 0.1, 3.0])
        scaled = make_var_model(D @ COEFFS @ np.linalg.inv(D), D @ SIGMA @ D, VAR_IDS)
        rng = np.random.default_rng(5)
        for _ in range(20):
            q = draw_candidate(model.chol, rng).q
            base = reduced_form_irf(model, 2) @ (model.chol @ q)
            other = reduced_form_irf(scaled, 2) @ (scaled.chol @ q)
            _, p1 = evaluate_restrictions(base, spec, restriction_scales(model))
            _, p2 = evaluate_restrictions(other, spec, restriction_scales(scaled))
            assert p1 == pytest.approx(p2, rel=1e-9, abs=1e-9)


class TestCandidates:
    def test_identity_factor(self):
        impulse = impulse_from_rotation(np.eye(3), np.array([1.0, 0.0, 0.0]))
        np.testing.assert_array_equal(impulse.alpha, [1.0, 0.0, 0.0])

    def test_unit_length(self, model, rng):
        for _ in range(50):
            impulse = draw_candidate(model.chol, rng)
            assert abs(np.linalg.norm(impulse.q) - 1.0) < 1e-12
            np.testing.assert_array_equal(impulse.alpha, model.chol @ impulse.q)

    def test_orient_makes_a_cut(self, model, rng):
        for _ in range(20):
            q = orient(draw_candidate(model.chol, rng).q, model.chol, 2)
            assert (model.chol @ q)[2] <= 0

    @pytest.mark.slow
    def test_sphere_uniformity(self):
        rng = np.random.default_rng(2024)
        L = np.eye(4)
        qs = np.array([draw_candidate(L, rng).q for _ in range(100_000)])
        assert np.all(np.abs(qs.mean(axis=0)) < 0.01)


class TestBuildSpec:
    def test_unknown_variables_dropped(self):
        spec = build_spec(VAR_IDS, "PIT")
        assert set(spec.signs) == {"GDP", "CPI"}
        assert spec.signs["GDP"] is Sign.POSITIVE

    def test_bad_sign(self):
        with pytest.raises(IdentificationError, match="Unknown sign"):
            build_spec(VAR_IDS, "PIT", {"GDP": "up"})

    def test_shock_var_must_be_in_var(self):
        with pytest.raises(IdentificationError):
            build_spec(VAR_IDS, "CIT", {})


class TestIdentifyTaxShock:
    def test_unrestricted_accepts_everything(self, model):
        spec = build_spec(VAR_IDS, "PIT", {})
        draws = identify_tax_shock(model, spec, n_target=50, max_attempts=1000, seed=1)
        assert draws.n_accepted == 50
        assert draws.acceptance_rate == 1.0

    def test_accepted_draws_meet_signs(self, model, spec):
        draws = identify_tax_shock(model, spec, n_target=200, max_attempts=20000, seed=3, H=8)
        scales = restriction_scales(model)
        assert draws.irfs.shape == (draws.n_accepted, 9, 3)
        for vector, irf in zip(draws.accepted, draws.irfs):
            meets, _ = evaluate_restrictions(irf, spec, scales)
            assert meets and vector.meets_signs
            assert irf[0, 2] < 0
            np.testing.assert_allclose(irf[0], vector.alpha)

    def test_bivariate_admissible_quadrant(self):
        model = make_var_model(np.zeros((2, 2)), var_ids=["PIT", "GDP"])
        spec = build_spec(["PIT", "GDP"], "PIT", {"GDP": "+"}, horizon=0)
        draws = identify_tax_shock(model, spec, n_target=10_000, max_attempts=4000, seed=11)
        qs = np.array([v.q for v in draws.accepted])
        assert np.all(qs[:, 0] < 0) and np.all(qs[:, 1] > 0)
        assert 0.45 < draws.acceptance_rate < 0.55

    def test_deterministic_across_workers(self, model, spec):
        serial = identify_tax_shock(model, spec, n_target=300, max_attempts=5000, seed=42, workers=1)
        parallel = identify_tax_shock(model, spec, n_target=300, max_attempts=5000, seed=42, workers=4)
        assert serial.n_attempted == parallel.n_attempted
        np.testing.assert_array_equal(
            np.array([v.q for v in serial.accepted]), np.array([v.q for v in parallel.accepted])
        )
        np.testing.assert_array_equal(serial.irfs, parallel.irfs)

    def test_different_seeds_differ(self, model, spec):
        a = identify_tax_shock(model, spec, n_target=5, max_attempts=2000, seed=1)
        b = identify_tax_shock(model, spec, n_target=5, max_attempts=2000, seed=2)
        assert not np.array_equal(a.accepted[0].q, b.accepted[0].q)

    def test_penalty_beats_rejection(self, model, spec):
        rejection = identify_tax_shock(model, spec, n_target=10**6, max_attempts=3000, seed=8)
        penalty = identify_tax_shock(model, spec, max_attempts=3000, seed=8, mode=IdentificationMode.PENALTY)
        assert penalty.minimizer == 0
        best = min(v.penalty for v in rejection.accepted)
        assert penalty.accepted[0].penalty <= best + 1e-9

    def test_polish_never_increases_penalty(self, model, spec, rng):
        scales = restriction_scales(model)
        psi = reduced_form_irf(model, spec.horizon)
        for _ in range(5):
            q = orient(draw_candidate(model.chol, rng).q, model.chol, spec.shock_index)
            _, before = evaluate_restrictions(psi @ (model.chol @ q), spec, scales)
            polished, after = polish_rotation(q, model, spec, scales, max_evaluations=2000)
            assert after <= before + 1e-12
            assert abs(np.linalg.norm(polished) - 1.0) < 1e-12

    def test_impossible_restrictions(self, model):
        spec = build_spec(VAR_IDS, "PIT", {"PIT": "+"})
        with pytest.raises(IdentificationError, match="No draw") as info:
            identify_tax_shock(model, spec, n_target=10, max_attempts=500, seed=0)
        assert info.value.acceptance_rate == 0.0
        assert info.value.n_attempted == 500

    def test_spec_order_must_match(self, model):
        spec = build_spec(["CPI", "GDP", "PIT"], "PIT", {"GDP": "+"})
        with pytest.raises(IdentificationError, match="variable order"):
            identify_tax_shock(model, spec, n_target=1, max_attempts=10)


def _degrees_between(a: np.ndarray, b: np.ndarray) -> float:
    cosine = abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.degrees(np.arccos(min(cosine, 1.0))))


class TestIdentifiedSet:
    # GDP at h=1 is -0.2*q0 - 0.8*q1, so the cone is 0 < q1 < 0.25*|q0|.
    A = np.array([[0.5, 0.0], [-0.2, -0.8]])

    def test_narrow_cone_around_shock_axis(self):
        model = make_var_model(self.A, var_ids=["PIT", "GDP"])
        spec = build_spec(["PIT", "GDP"], "PIT", {"PIT": "-", "GDP": "+"}, horizon=1)
        draws = identify_tax_shock(model, spec, n_target=500, max_attempts=50_000, seed=4)
        qs = np.array([v.q for v in draws.accepted])
        assert np.all(qs[:, 1] < 0.25 * np.abs(qs[:, 0]) + 1e-12)
        angles = np.degrees(np.arccos(np.abs(qs[:, 0])))
        assert angles.mean() < 15.0

    @pytest.mark.slow
    def test_true_shock_inside_recovered_set(self):
        alpha_true = np.array([-1.0, 0.12]) / np.linalg.norm([-1.0, 0.12])
        impact = np.column_stack([alpha_true, [0.3, 1.0]])
        spec = build_spec(["PIT", "GDP"], "PIT", {"GDP": "+"}, horizon=1)
        for seed in range(20):
            data = simulate_var1(self.A, 2000, np.random.default_rng(seed), impact)
            model = fit_var(data, 1, ["PIT", "GDP"])
            draws = identify_tax_shock(model, spec, n_target=200, max_attempts=20_000, seed=seed)
            alphas = np.array([v.alpha / np.linalg.norm(v.alpha) for v in draws.accepted])
            median = np.median(alphas, axis=0)
            assert _degrees_between(median, alpha_true) < 20.0, seed
