import numpy as np
import pytest

from asljde import (InvalidGrid, NonPositiveVolume, PhysioParams,
                    StateTrajectory, bold_from_states, generate_responses,
                    integrate_balloon)
from asljde.balloon import write_curve_csv

# reference values from a 1 ms fixed-step impulse integration, defaults
ORACLE_TTP_FLOW = 1.809
ORACLE_MAX_FLOW = 0.383475028528
ORACLE_TTP_BOLD = 3.057
ORACLE_MAX_BOLD = 0.0115507251351


class TestPhysioParams:
    def test_defaults_carry_scanner_calibration(self):
        p = PhysioParams()
        assert p.k1 == pytest.approx(7.0 * 0.8)
        assert p.k2 == 2.0
        assert p.k3 == pytest.approx(2.0 * 0.8 - 0.2)

    def test_calibration_tracks_e0(self):
        p = PhysioParams(e0=0.4)
        assert (p.k1, p.k3) == (pytest.approx(2.8), pytest.approx(0.6))

    @pytest.mark.parametrize("kwargs", [
        {"tau_psi": 0.0}, {"tau_f": -1.0}, {"tau_m": 0.0},
        {"e0": 0.0}, {"e0": 1.0}, {"e0": 1.5},
        {"w_tilde": 0.0}, {"w_tilde": 1.2},
        {"v0": 0.0}, {"v0": 1.0},
    ])
    def test_invalid_parameters_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PhysioParams(**kwargs)

    def test_explicit_scanner_constants_kept(self):
        p = PhysioParams(k1=3.0, k2=1.0, k3=0.5)
        assert (p.k1, p.k2, p.k3) == (3.0, 1.0, 0.5)


class TestIntegrator:
    @pytest.mark.parametrize("duration", [0.05, 1.0, 25.0])
    def test_rest_input_is_exact_fixed_point(self, friston, duration):
        traj = integrate_balloon(friston, None, duration)
        assert np.all(traj.psi == 0.0)
        assert np.all(traj.f_in == 1.0)
        assert np.all(traj.nu == 1.0)
        assert np.all(traj.xi == 1.0)

    def test_rest_fixed_point_for_other_extraction(self):
        # the fixed point must not depend on rounding of 1 - e0
        for e0 in (0.3, 0.62, 0.9):
            traj = integrate_balloon(PhysioParams(e0=e0), None, 2.0)
            assert np.all(traj.xi == 1.0) and np.all(traj.nu == 1.0)

    def test_impulse_flow_peak_matches_fine_reference(self, friston):
        traj = integrate_balloon(friston, None, 25.0, step=0.05,
                                 initial_psi=friston.eta)
        flow = traj.f_in - 1.0
        peak_time = traj.times[np.argmax(flow)]
        assert abs(peak_time - ORACLE_TTP_FLOW) <= 0.05
        assert flow.max() > 0.0
        # rises above baseline, then undershoots
        assert flow.min() < 0.0
        assert np.argmin(flow) > np.argmax(flow)

    def test_transit_time_dilates_response(self, friston):
        slow = PhysioParams(tau_m=2.0)
        base = integrate_balloon(friston, None, 25.0, initial_psi=friston.eta)
        dilated = integrate_balloon(slow, None, 25.0, initial_psi=slow.eta)
        t_base = base.times[np.argmax(base.f_in)]
        t_slow = dilated.times[np.argmax(dilated.f_in)]
        assert t_slow > t_base

    def test_fourth_order_convergence(self, friston, fine_trajectory):
        errors = []
        for step in (0.2, 0.1, 0.05, 0.025):
            traj = integrate_balloon(friston, None, 25.0, step=step,
                                     initial_psi=friston.eta)
            sub = int(round(step / 0.001))
            errors.append(np.max(np.abs(traj.f_in - fine_trajectory.f_in[::sub])))
        for coarse, fine in zip(errors, errors[1:]):
            assert 12.0 < coarse / fine < 22.0

    def test_stimulus_grid_checked(self, friston):
        with pytest.raises(InvalidGrid):
            integrate_balloon(friston, np.zeros(5), 1.0, step=0.05)
        with pytest.raises(InvalidGrid):
            integrate_balloon(friston, None, 1.03, step=0.05)
        with pytest.raises(InvalidGrid):
            integrate_balloon(friston, None, 1.0, step=-0.1)

    def test_nonpositive_volume_raises(self, friston):
        # a violent negative flow drive collapses the balloon
        with pytest.raises(NonPositiveVolume):
            integrate_balloon(friston, None, 25.0, initial_psi=-80.0)

    def test_boxcar_stimulus_drives_flow(self, friston):
        n = int(round(10.0 / 0.05))
        u = np.zeros(n + 1)
        u[: n // 2] = 1.0
        traj = integrate_balloon(friston, u, 10.0)
        assert traj.f_in.max() > 1.05


class TestBoldExpression:
    def test_rest_trajectory_maps_to_zero(self, friston):
        traj = integrate_balloon(friston, None, 5.0)
        bold = bold_from_states(traj, friston)
        assert np.all(bold.values == 0.0)

    def test_sign_pattern_positive_lobe_then_undershoot(self, friston):
        traj = integrate_balloon(friston, None, 25.0, initial_psi=friston.eta)
        bold = bold_from_states(traj, friston)
        assert bold.values.max() > 0.0
        assert bold.values.min() < 0.0
        assert np.argmin(bold.values) > np.argmax(bold.values)

    def test_zero_volume_sample_rejected(self, friston):
        n = 5
        traj = StateTrajectory(times=np.arange(n) * 0.1, psi=np.zeros(n),
                               f_in=np.ones(n), nu=np.array([1, 1, 0, 1, 1.0]),
                               xi=np.ones(n))
        with pytest.raises(ZeroDivisionError):
            bold_from_states(traj, friston)

    def test_resampling_needs_length(self, friston):
        traj = integrate_balloon(friston, None, 5.0)
        with pytest.raises(ValueError):
            bold_from_states(traj, friston, dt=0.5)
        with pytest.raises(InvalidGrid):
            bold_from_states(traj, friston, dt=0.5, length=50)


class TestGenerateResponses:
    def test_zero_efficacy_yields_exact_zero_curves(self):
        brf, prf = generate_responses(PhysioParams(eta=0.0), dt=0.5, length=50)
        assert np.all(brf.values == 0.0)
        assert np.all(prf.values == 0.0)

    def test_curves_start_at_zero_and_have_full_length(self, friston):
        brf, prf = generate_responses(friston, dt=0.5, length=50)
        assert brf.values.size == 51 and prf.values.size == 51
        assert brf.values[0] == 0.0 and prf.values[0] == 0.0

    def test_perfusion_peaks_before_bold(self, friston):
        brf, prf = generate_responses(friston, dt=0.5, length=50)
        assert np.argmax(prf.values) < np.argmax(brf.values)

    def test_peak_magnitudes_match_fine_reference(self, friston):
        brf, prf = generate_responses(friston, dt=0.5, length=50)
        assert np.abs(prf.values).max() == pytest.approx(ORACLE_MAX_FLOW, rel=0.02)
        assert np.abs(brf.values).max() == pytest.approx(ORACLE_MAX_BOLD, rel=0.02)

    def test_small_signal_regime_is_linear(self, friston):
        resp = {}
        for scale in (0.01, 0.02):
            brf, prf = generate_responses(PhysioParams(eta=scale * friston.eta),
                                          dt=0.5, length=50)
            resp[scale] = (brf.values / scale, prf.values / scale)
        for a, b in zip(resp[0.01], resp[0.02]):
            assert np.linalg.norm(a - b) / np.linalg.norm(b) < 0.02

    def test_extraction_fraction_scales_bold_magnitude(self):
        peaks = []
        for e0 in (0.5, 0.65, 0.8):
            brf, _ = generate_responses(PhysioParams(e0=e0), dt=0.5, length=50)
            peaks.append(np.abs(brf.values).max())
        assert peaks[0] < peaks[1] < peaks[2]

    def test_argument_validation(self, friston):
        with pytest.raises(ValueError):
            generate_responses(friston, dt=0.0, length=50)
        with pytest.raises(ValueError):
            generate_responses(friston, dt=0.5, length=1)


def test_curve_csv_format(tmp_path, friston):
    brf, _ = generate_responses(friston, dt=0.5, length=10)
    path = tmp_path / "brf.csv"
    write_curve_csv(path, brf)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,value"
    assert len(lines) == 12
    t, v = lines[3].split(",")
    assert float(t) == pytest.approx(1.0)
    assert float(v) == pytest.approx(brf.values[2], rel=1e-10)
