import numpy as np
import pytest

from asljde import (GridMismatch, PhysioParams, ResponseFunction,
                    SingularOperator, apply_omega, apply_omega_inverse,
                    build_omega, generate_responses, smoothness_prior)
from asljde.linop import (centered_diff_matrix, extraction_slope,
                          first_diff_matrix, second_diff_matrix,
                          write_matrix_csv)
from asljde.metrics import rrmse

# direct evaluation of the extraction slope at e0=0.8, tau_m=1
GAMMA_DEFAULT = 0.5976405218914749
# residual of the operator image of the impulse BRF against the impulse PRF,
# both sampled from a 1 ms integration on the dt=0.5 grid
ORACLE_OPERATOR_RRMSE = 0.138435


class TestDifferenceOperators:
    def test_backward_stencil_layout(self):
        d = first_diff_matrix(6, 0.5)
        assert d.shape == (5, 5)
        assert np.all(np.diag(d) == 2.0)
        assert np.all(np.diag(d, k=-1) == -2.0)
        d[np.arange(5), np.arange(5)] = 0.0
        d[np.arange(1, 5), np.arange(4)] = 0.0
        assert np.all(d == 0.0)

    @pytest.mark.parametrize("shift", [1e-6, 0.3, 2.0, 50.0])
    def test_shifted_systems_invertible(self, shift):
        for build in (first_diff_matrix, centered_diff_matrix):
            d = build(10, 0.25)
            shifted = d + shift * np.eye(9)
            identity = shifted @ np.linalg.inv(shifted)
            assert np.max(np.abs(identity - np.eye(9))) < 1e-8

    def test_centered_stencil_skew_symmetric(self):
        d = centered_diff_matrix(8, 0.5)
        assert np.max(np.abs(d + d.T)) == 0.0

    def test_second_diff_stencil_and_truncation(self):
        d2 = second_diff_matrix(6, 0.5)
        inv_dt2 = 4.0
        assert np.all(np.diag(d2) == -2.0 * inv_dt2)
        assert np.all(np.diag(d2, 1) == inv_dt2)
        assert np.all(np.diag(d2, -1) == inv_dt2)
        # zero boundary: first row has no left neighbor contribution
        assert d2[0, 0] == -2.0 * inv_dt2 and d2[0, 1] == inv_dt2


class TestSmoothnessPrior:
    def test_covariance_symmetric_positive_definite(self):
        prior = smoothness_prior(50, 0.5)
        assert np.max(np.abs(prior.sigma - prior.sigma.T)) == 0.0
        assert np.linalg.eigvalsh(prior.sigma).min() > 0.0

    def test_matches_unit_stencil_scaling(self):
        # sigma equals dt^4 times the inverse Gram of the unit stencil
        dt = 0.5
        prior = smoothness_prior(10, dt)
        unit = second_diff_matrix(10, 1.0)
        expected = dt**4 * np.linalg.inv(unit.T @ unit)
        assert np.allclose(prior.sigma, expected, rtol=1e-9)


class TestOmegaOperator:
    def test_extraction_slope_value(self):
        assert extraction_slope(PhysioParams()) == pytest.approx(GAMMA_DEFAULT,
                                                                 abs=1e-12)

    def test_resolvent_residuals(self):
        p = PhysioParams()
        op = build_omega(p, 0.5, 50)
        d = centered_diff_matrix(50, 0.5)
        eye = np.eye(49)
        res_a = (d + eye / (p.w_tilde * p.tau_m)) @ op.resolvent_a - eye
        res_b = (d + eye / p.tau_m) @ op.resolvent_b - eye
        assert np.max(np.abs(res_a)) < 1e-10
        assert np.max(np.abs(res_b)) < 1e-10

    def test_round_trip_identity(self):
        op = build_omega(PhysioParams(), 0.5, 50)
        eye = np.eye(49)
        assert np.max(np.abs(op.omega @ op.omega_inv - eye)) < 1e-8
        assert np.max(np.abs(op.omega_inv @ op.omega - eye)) < 1e-8

    def test_zero_maps_to_zero(self):
        op = build_omega(PhysioParams(), 0.5, 50)
        zero = ResponseFunction(0.5, np.zeros(51))
        assert np.all(apply_omega(op, zero).values == 0.0)
        assert np.all(apply_omega_inverse(op, zero).values == 0.0)

    def test_apply_round_trip_on_curve(self, friston):
        op = build_omega(friston, 0.5, 50)
        brf, _ = generate_responses(friston, 0.5, 50)
        back = apply_omega_inverse(op, apply_omega(op, brf))
        assert np.max(np.abs(back.values[1:-1] - brf.values[1:-1])) < 1e-6

    def test_operator_tracks_impulse_responses(self, friston):
        op = build_omega(friston, 0.5, 50)
        brf, prf = generate_responses(friston, 0.5, 50)
        prf_lin = apply_omega(op, brf)
        brf_lin = apply_omega_inverse(op, prf)
        for est, ref in ((prf_lin, prf), (brf_lin, brf)):
            assert np.sign(est.values[np.argmax(np.abs(est.values))]) == \
                np.sign(ref.values[np.argmax(np.abs(ref.values))])
            assert abs(0.5 * np.argmax(est.values)
                       - 0.5 * np.argmax(ref.values)) <= 1.0
        assert rrmse(prf_lin.values, prf.values) <= 1.2 * ORACLE_OPERATOR_RRMSE

    def test_linear_regime_shrinks_operator_error(self, friston):
        op = build_omega(friston, 0.5, 50)
        errs = {}
        for eta in (0.5, 0.01):
            brf, prf = generate_responses(PhysioParams(eta=eta), 0.5, 50)
            errs[eta] = rrmse(apply_omega(op, brf).values, prf.values)
        assert errs[0.01] < errs[0.5]

    def test_grid_refinement_consistency(self, friston):
        coarse = build_omega(friston, 0.5, 50)
        fine = build_omega(friston, 0.25, 100)
        brf_c, _ = generate_responses(friston, 0.5, 50)
        brf_f, _ = generate_responses(friston, 0.25, 100)
        g_c = apply_omega(coarse, brf_c).values
        g_f = apply_omega(fine, brf_f).values[::2]
        assert np.linalg.norm(g_f - g_c) / np.linalg.norm(g_c) < 0.05

    def test_grid_mismatch_rejected(self, friston):
        op = build_omega(friston, 0.5, 50)
        with pytest.raises(GridMismatch):
            apply_omega(op, ResponseFunction(0.5, np.zeros(40)))
        with pytest.raises(GridMismatch):
            apply_omega(op, ResponseFunction(0.25, np.zeros(51)))

    def test_build_validation(self, friston):
        with pytest.raises(ValueError):
            build_omega(friston, 0.5, 2)
        with pytest.raises(ValueError):
            build_omega(friston, 0.0, 50)

    def test_conditioning_guard(self, friston, monkeypatch):
        # force the guard: a numerically singular system matrix must raise
        monkeypatch.setattr(np.linalg, "cond", lambda _m: 1e13)
        with pytest.raises(SingularOperator):
            build_omega(friston, 0.5, 50)


def test_matrix_csv_round_trip(tmp_path):
    mat = np.arange(12, dtype=float).reshape(3, 4) / 7.0
    path = tmp_path / "omega.csv"
    write_matrix_csv(path, mat)
    back = np.array([[float(v) for v in line.split(",")]
                     for line in path.read_text().strip().splitlines()])
    assert np.array_equal(back, mat)
