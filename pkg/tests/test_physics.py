"""Likelihoods, damping generator and calibration handling."""

import math

import numpy as np
import pytest

from fockloop import (
    ActuatorCalibration,
    PhysicsParams,
    TargetSpec,
    actuator_likelihood,
    actuator_matrix,
    relaxation_generator,
    relaxation_propagator,
    sensor_likelihood,
    sensor_weights,
    thermal_distribution,
)

PARAMS = PhysicsParams()
IDEAL = ActuatorCalibration.ideal(PARAMS.n_max)


class TestParams:
    def test_defaults(self):
        p = PhysicsParams()
        assert p.t_cavity == 65e-3
        assert p.t_sample == 82e-6
        assert p.omega0 == pytest.approx(2 * math.pi * 47.9e3)
        assert p.phi0 == pytest.approx(0.252 * math.pi)
        assert (p.m_sensor, p.m_control) == (1.3, 0.5)
        assert (p.n_sensors, p.n_controls) == (12, 4)
        assert (p.b_s, p.c_s) == (0.02, 0.75)
        assert p.delay_depth == 4

    @pytest.mark.parametrize("bad", [
        {"t_cavity": -1.0},
        {"eta_d": 1.5},
        {"c_s": -0.1},
        {"n_max": 0},
        {"t_sample": 0.0},
    ])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(ValueError):
            PhysicsParams(**bad)

    def test_warns_on_slow_sampling(self):
        with pytest.warns(UserWarning):
            PhysicsParams(t_sample=1e-3)

    def test_target_spec_derivations(self):
        p = PhysicsParams()
        tgt = TargetSpec.for_target(4, p)
        assert tgt.phi_r == pytest.approx(-0.508 * math.pi)
        assert tgt.t_e == pytest.approx(1.6 * math.pi / (p.omega0 * math.sqrt(5)))
        assert tgt.t_g == pytest.approx(2.4 * math.pi / (p.omega0 * 2.0))

    def test_target_bounds(self):
        p = PhysicsParams()
        with pytest.raises(ValueError):
            TargetSpec.for_target(0, p)       # t_g undefined at the vacuum target
        with pytest.raises(ValueError):
            TargetSpec.for_target(p.n_max - 3, p)


class TestCalibration:
    def test_default_shape(self):
        c = ActuatorCalibration.default(12)
        assert c.contrast[0] == pytest.approx(0.9)
        assert c.contrast[12] == pytest.approx(0.9 * math.exp(-12 / 20))
        assert np.all(c.phase == 0.0)

    def test_contrast_range_enforced(self):
        with pytest.raises(ValueError):
            ActuatorCalibration(contrast=np.array([1.2]), phase=np.array([0.0]))

    def test_from_file_roundtrip(self, tmp_path):
        path = tmp_path / "calib.txt"
        rows = ["# n, contrast, phase_offset_rad"]
        rows += [f"{n}, {0.8 - 0.01 * n}, {0.001 * n}" for n in range(13)]
        path.write_text("\n".join(rows) + "\n")
        c = ActuatorCalibration.from_file(path, 12)
        assert c.contrast[3] == pytest.approx(0.77)
        assert c.phase[5] == pytest.approx(0.005)

    def test_from_file_requires_increasing_coverage(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("0, 0.9, 0\n1, 0.9, 0\n")
        with pytest.raises(ValueError):
            ActuatorCalibration.from_file(path, 12)
        path.write_text("0, 0.9, 0\n2, 0.9, 0\n")
        with pytest.raises(ValueError):
            ActuatorCalibration.from_file(path, 12)


class TestSensorLikelihood:
    def test_ideal_bright_fringe(self):
        p = PhysicsParams(b_s=0.0, c_s=1.0)
        assert sensor_likelihood(0, 0, 0.0, p) == pytest.approx(1.0)

    def test_half_fringe_at_target(self):
        # phase tuned to the target puts both outcomes near 1/2
        p = PhysicsParams()
        n_t = 4
        phi_r = math.pi / 2 - p.phi0 * n_t
        assert sensor_likelihood(1, n_t, phi_r, p) == pytest.approx(0.51, abs=1e-12)

    def test_quarter_period(self):
        p = PhysicsParams(phi0=math.pi / 4, b_s=0.0, c_s=1.0)
        assert sensor_likelihood(0, 2, 0.0, p) == pytest.approx(0.5, abs=1e-12)

    def test_pair_sums_to_one_without_offset(self):
        p = PhysicsParams(b_s=0.0)
        for n in range(p.n_max + 1):
            total = sensor_likelihood(0, n, 0.7, p) + sensor_likelihood(1, n, 0.7, p)
            assert total == pytest.approx(1.0, abs=1e-15)

    def test_offset_excess_is_half_bs(self):
        p = PhysicsParams()
        for n in range(p.n_max + 1):
            total = sensor_likelihood(0, n, -1.1, p) + sensor_likelihood(1, n, -1.1, p)
            assert total == pytest.approx(1.0 + p.b_s / 2, abs=1e-15)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            sensor_likelihood(0, PARAMS.n_max + 1, 0.0, PARAMS)
        with pytest.raises(ValueError):
            sensor_likelihood(2, 0, 0.0, PARAMS)

    def test_weights_table_matches_scalar(self):
        table = sensor_weights(0.3, PARAMS)
        for j in (0, 1):
            for n in range(PARAMS.n_max + 1):
                assert table[j, n] == pytest.approx(sensor_likelihood(j, n, 0.3, PARAMS))


class TestActuatorLikelihood:
    def test_trapping_condition(self):
        # an emitter timed to a full Rabi turn leaves the target state alone
        n_t = 4
        t = 2 * math.pi / (PARAMS.omega0 * math.sqrt(n_t + 1))
        assert actuator_likelihood(0, 1, n_t, t, PARAMS, IDEAL) < 1e-12

    def test_vacuum_cannot_be_absorbed(self):
        for t in (1e-6, 3e-5, 9e-4):
            assert actuator_likelihood(1, 0, 0, t, PARAMS, IDEAL) == 0.0
            assert actuator_likelihood(1, 1, 0, t, PARAMS, IDEAL) == 1.0

    def test_emission_value_frozen(self):
        # flip probability from m=3 with the n_t=4 emitter time, ideal fringe
        t_e = 1.6 * math.pi / (PARAMS.omega0 * math.sqrt(5))
        got = actuator_likelihood(0, 1, 3, t_e, PARAMS, IDEAL)
        assert got == pytest.approx(0.6074100142638763, abs=1e-12)

    def test_matches_independent_sin_cos_form(self):
        # ideal law: stay = cos^2(omega0 t sqrt(r)/2), flip = sin^2(...), r the ladder index
        t = 1.7e-5
        for j in (0, 1):
            for m in range(PARAMS.n_max + 1):
                r = m + 1 - j
                half = 0.5 * PARAMS.omega0 * t * math.sqrt(r)
                stay = math.cos(half) ** 2 if r else 1.0
                flip = math.sin(half) ** 2 if r else 0.0
                assert actuator_likelihood(j, j, m, t, PARAMS, IDEAL) == pytest.approx(stay, abs=1e-12)
                assert actuator_likelihood(j, 1 - j, m, t, PARAMS, IDEAL) == pytest.approx(flip, abs=1e-12)

    def test_trapping_zeros_on_the_ladder(self):
        for m in range(PARAMS.n_max):
            for q in (1, 2, 3):
                t = 2 * math.pi * q / (PARAMS.omega0 * math.sqrt(m + 1))
                assert actuator_likelihood(0, 1, m, t, PARAMS, IDEAL) < 1e-12

    def test_pair_normalized(self):
        calib = ActuatorCalibration(contrast=np.full(13, 0.8), phase=np.full(13, 0.2))
        for j in (0, 1):
            for m in range(PARAMS.n_max + 1):
                total = (actuator_likelihood(j, 0, m, 2e-5, PARAMS, calib)
                         + actuator_likelihood(j, 1, m, 2e-5, PARAMS, calib))
                assert total == pytest.approx(1.0, abs=1e-15)

    def test_rejects_negative_m(self):
        with pytest.raises(ValueError):
            actuator_likelihood(0, 1, -1, 1e-5, PARAMS, IDEAL)

    def test_matrix_matches_scalar(self):
        mat = actuator_matrix(0, 1, 2e-5, PARAMS, IDEAL)
        for m in range(PARAMS.n_max):
            assert mat[m + 1, m] == pytest.approx(actuator_likelihood(0, 1, m, 2e-5, PARAMS, IDEAL))
        # an emission out of the truncated space contributes nothing
        assert mat[:, PARAMS.n_max].sum() == 0.0


class TestRelaxation:
    def test_zero_temperature_rates(self):
        p = PhysicsParams(n_thermal=0.0)
        gen = relaxation_generator(p)
        assert gen[0, 1] == pytest.approx(1.0 / p.t_cavity)
        assert gen[2, 1] == 0.0

    def test_columns_sum_to_zero(self):
        gen = relaxation_generator(PARAMS)
        assert np.abs(gen.sum(axis=0)).max() < 1e-12

    def test_conserves_probability(self):
        gen = relaxation_generator(PARAMS)
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = rng.random(PARAMS.n_max + 1)
            p /= p.sum()
            assert abs((gen @ p).sum()) < 1e-12

    def test_stationary_state_is_thermal(self):
        gen = relaxation_generator(PARAMS)
        th = thermal_distribution(PARAMS)
        assert np.abs(gen @ th).max() < 1e-12

    def test_detailed_balance_solution(self):
        th = thermal_distribution(PARAMS)
        ratio = PARAMS.n_thermal / (1 + PARAMS.n_thermal)
        for n in range(PARAMS.n_max):
            assert th[n + 1] / th[n] == pytest.approx(ratio)
        mean = (np.arange(13) * th).sum()
        assert mean == pytest.approx(PARAMS.n_thermal, abs=1e-8)

    def test_propagator_converges_to_thermal(self):
        prop = relaxation_propagator(50 * PARAMS.t_cavity, PARAMS)
        th = thermal_distribution(PARAMS)
        rng = np.random.default_rng(1)
        for _ in range(10):
            p = rng.random(PARAMS.n_max + 1)
            p /= p.sum()
            out = prop @ p
            assert 0.5 * np.abs(out - th).sum() < 1e-6   # total variation

    def test_propagator_columns_sum_to_one(self):
        for dt in (PARAMS.t_sample, 10 * PARAMS.t_sample, PARAMS.t_cavity):
            prop = relaxation_propagator(dt, PARAMS)
            assert np.abs(prop.sum(axis=0) - 1.0).max() < 1e-10
