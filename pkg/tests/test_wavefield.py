import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import movingsource as ms
from movingsource.wavefield import _single_source_forward

FOUR_PI = 4 * math.pi


def stationary_source(position=(0.0, 0.0), intensity=1.0, turnoff=15.0, m=40):
    grid = np.linspace(0.0, turnoff, m)
    return ms.SourceModel.single(
        ms.SampledFunction(grid, np.full(m, position[0])),
        ms.SampledFunction(grid, np.full(m, position[1])),
        ms.SampledFunction(grid, np.full(m, intensity), "zero"),
    )


def linear_source(velocity=(0.5, 0.0), turnoff=15.0, m=301):
    grid = np.linspace(0.0, turnoff, m)
    return ms.SourceModel.single(
        ms.SampledFunction(grid, velocity[0] * grid),
        ms.SampledFunction(grid, velocity[1] * grid),
        ms.SampledFunction(grid, np.ones(m), "zero"),
    )


class TestSampledFunction:
    def test_interpolates_linearly(self):
        f = ms.SampledFunction([0.0, 1.0, 3.0], [0.0, 2.0, 0.0])
        assert f(0.5) == pytest.approx(1.0)
        assert f(2.0) == pytest.approx(1.0)
        np.testing.assert_allclose(f(np.array([0.0, 1.0, 3.0])), [0.0, 2.0, 0.0])

    def test_clamp_and_zero_extrapolation(self):
        f = ms.SampledFunction([0.0, 1.0], [2.0, 3.0], "clamp")
        g = ms.SampledFunction([0.0, 1.0], [2.0, 3.0], "zero")
        assert f(-1.0) == 2.0 and f(5.0) == 3.0
        assert g(-1.0) == 0.0 and g(5.0) == 0.0
        assert g(1.0) == 3.0  # endpoint itself still counts

    def test_derivative_uses_containing_segment(self):
        f = ms.SampledFunction([0.0, 1.0, 2.0], [0.0, 1.0, 3.0])
        assert f.derivative(0.5) == pytest.approx(1.0)
        assert f.derivative(1.5) == pytest.approx(2.0)
        # right-sided at interior nodes, left-sided at the last node
        assert f.derivative(1.0) == pytest.approx(2.0)
        assert f.derivative(2.0) == pytest.approx(2.0)
        assert f.derivative(-0.5) == 0.0 and f.derivative(2.5) == 0.0
        np.testing.assert_allclose(f.node_derivatives(), [1.0, 2.0, 2.0])

    def test_validation(self):
        with pytest.raises(ms.ValidationError):
            ms.SampledFunction([0.0, 0.0], [1.0, 2.0])
        with pytest.raises(ms.ValidationError):
            ms.SampledFunction([0.0], [1.0])
        with pytest.raises(ms.ValidationError):
            ms.SampledFunction([0.0, 1.0], [1.0, 2.0], "bogus")


class TestPhysicalConfig:
    def test_defaults_valid(self):
        cfg = ms.PhysicalConfig()
        assert cfg.wave_speed == 1.0

    @pytest.mark.parametrize("kwargs", [
        {"wave_speed": 0.0},
        {"turnoff_time": -1.0},
        {"final_time": 10.0, "turnoff_time": 10.0},
    ])
    def test_rejects_bad_timing(self, kwargs):
        with pytest.raises(ms.ValidationError):
            ms.PhysicalConfig(**kwargs)


class TestRetardedTime:
    def test_stationary_closed_form(self):
        cfg = ms.PhysicalConfig()
        src = stationary_source().sources[0]
        assert ms.retarded_time((3.0, 0.0, 0.0), 5.0, src, cfg) == pytest.approx(2.0, abs=1e-12)

    def test_linear_motion_closed_form(self):
        # 5 - tau = 3 - 0.5 tau  =>  tau = 4
        cfg = ms.PhysicalConfig()
        src = linear_source().sources[0]
        tau = ms.retarded_time((3.0, 0.0, 0.0), 5.0, src, cfg)
        assert tau == pytest.approx(4.0, abs=1e-10)
        tau = ms.retarded_time((3.0, 0.0, 0.0), 5.0, src, cfg, tol=1e-14)
        r = abs(3.0 - src.traj_x(tau))
        assert abs(cfg.wave_speed * (5.0 - tau) - r) < 1e-12

    def test_pre_wavefront_is_negative(self):
        cfg = ms.PhysicalConfig()
        src = stationary_source().sources[0]
        assert ms.retarded_time((3.0, 0.0, 0.0), 1.0, src, cfg) == pytest.approx(-2.0, abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        speed=st.floats(0.0, 0.8),
        angle=st.floats(0.0, 2 * math.pi),
        sensor_r=st.floats(2.0, 6.0),
        sensor_angle=st.floats(0.0, 2 * math.pi),
        t=st.floats(0.5, 20.0),
    )
    def test_fixed_point_residual(self, speed, angle, sensor_r, sensor_angle, t):
        cfg = ms.PhysicalConfig()
        src = linear_source((speed * math.cos(angle), speed * math.sin(angle))).sources[0]
        sensor = (sensor_r * math.cos(sensor_angle), sensor_r * math.sin(sensor_angle), 1.0)
        tau = ms.retarded_time(sensor, t, src, cfg)
        r = math.hypot(sensor[0] - src.traj_x(tau), sensor[1] - src.traj_y(tau), sensor[2])
        assert abs(cfg.wave_speed * (t - tau) - r) <= 1e-10 * cfg.wave_speed * cfg.final_time
        assert tau <= t

    def test_nonconvergence_reports_residual(self):
        cfg = ms.PhysicalConfig()
        src = linear_source((0.9, 0.0)).sources[0]  # contraction rate 0.9: slow
        with pytest.raises(ms.RetardedTimeError) as excinfo:
            ms.retarded_time((3.0, 0.0, 0.0), 14.0, src, cfg, max_iter=5)
        assert excinfo.value.residual is not None and excinfo.value.residual > 0


class TestEvaluateField:
    def test_stationary_analytic(self):
        cfg = ms.PhysicalConfig()
        model = stationary_source()
        u = ms.evaluate_field(model, (3.0, 0.0, 0.0), 5.0, cfg)
        assert u == pytest.approx(1.0 / (12 * math.pi), rel=1e-12)

    def test_moving_closed_form(self):
        cfg = ms.PhysicalConfig()
        model = linear_source()
        u = ms.evaluate_field(model, (3.0, 0.0, 0.0), 5.0, cfg)
        assert u == pytest.approx(1.0 / (2 * math.pi), rel=1e-9)

    def test_moving_against_retarded_quadrature(self):
        # Independent oracle: u(t,x) = int q(s) delta(t - s - r(s)/c) / (4 pi r(s)) ds
        # with the delta mollified by a narrow Gaussian and integrated densely.
        cfg = ms.PhysicalConfig()
        model = linear_source()
        src = model.sources[0]
        t, sensor = 5.0, np.array([3.0, 0.0, 0.0])
        s = np.linspace(0.0, t, 400_001)
        r = np.hypot(sensor[0] - src.traj_x(s), sensor[1] - src.traj_y(s))
        eps = 2e-3
        kernel = np.exp(-((t - s - r) ** 2) / (2 * eps**2)) / (eps * math.sqrt(2 * math.pi))
        oracle = np.trapezoid(src.intensity(s) * kernel / (FOUR_PI * r), s)
        assert ms.evaluate_field(model, sensor, t, cfg) == pytest.approx(oracle, rel=1e-3)

    def test_causality_exact_zero(self):
        cfg = ms.PhysicalConfig()
        model = linear_source()
        assert ms.evaluate_field(model, (3.0, 0.0, 0.0), 2.9, cfg) == 0.0
        assert ms.evaluate_field(model, (3.0, 0.0, 0.0), 0.0, cfg) == 0.0

    def test_near_field_guard(self):
        cfg = ms.PhysicalConfig()
        model = stationary_source()
        with pytest.raises(ms.NearFieldError):
            ms.evaluate_field(model, (1e-9, 0.0, 0.0), 5.0, cfg)

    def test_turned_off_source_goes_silent(self):
        cfg = ms.PhysicalConfig()
        model = stationary_source(turnoff=15.0)
        # emission at T0 arrives at 15 + 3; later times see zero intensity
        assert ms.evaluate_field(model, (3.0, 0.0, 0.0), 18.5, cfg) == 0.0


class TestForwardMap:
    def test_zero_intensity_gives_zero_matrix(self):
        cfg = ms.PhysicalConfig()
        grid = np.linspace(0, 15, 30)
        model = ms.SourceModel.single(
            ms.SampledFunction(grid, 0.1 * grid),
            ms.SampledFunction(grid, np.zeros(30)),
            ms.SampledFunction(grid, np.zeros(30), "zero"),
        )
        sensors = ms.sphere_sensors(10, 3.0)
        out = ms.forward_map(model, sensors, np.linspace(0, 20, 25), cfg)
        assert out.shape == (10, 25)
        assert np.all(out == 0.0)

    def test_matches_pointwise_evaluation(self):
        cfg = ms.PhysicalConfig()
        model = stationary_source(position=(0.4, -0.2), m=160)
        sensors = ms.sphere_sensors(6, 3.0)
        times = np.linspace(0.0, 20.0, 90)
        fast = ms.forward_map(model, sensors, times, cfg)
        slow = np.array([ms.evaluate_field(model, s, times, cfg) for s in sensors.positions])
        assert np.abs(fast - slow).max() <= 1e-10

    def test_interpolation_error_shrinks_with_refinement(self):
        cfg = ms.PhysicalConfig()
        sensors = ms.sphere_sensors(8, 3.0)
        times = np.linspace(0.0, 20.0, 120)

        def interp_error(m):
            grid = np.linspace(0.0, 15.0, m)
            model = ms.SourceModel.single(
                ms.SampledFunction(grid, np.cos(0.3 * grid) - 1.0),
                ms.SampledFunction(grid, np.sin(0.3 * grid)),
                ms.SampledFunction(grid, np.ones(m), "zero"),
            )
            fast = ms.forward_map(model, sensors, times, cfg)
            slow = np.array([ms.evaluate_field(model, s, times, cfg) for s in sensors.positions])
            return np.abs(fast - slow).max()

        coarse, fine = interp_error(60), interp_error(240)
        assert fine <= coarse / 4.0

    def test_numpy_fallback_matches_compiled_path(self):
        cfg = ms.PhysicalConfig()
        model = linear_source(m=80)
        sensors = ms.sphere_sensors(12, 3.0)
        times = np.linspace(0.0, 20.0, 70)
        compiled = ms.forward_map(model, sensors, times, cfg)
        fallback = _single_source_forward(model.sources[0], sensors.positions, times, cfg)
        np.testing.assert_allclose(compiled, fallback, rtol=1e-12, atol=1e-16)

    def test_fallback_row_blocks_stay_disjoint(self):
        # Regression: the flat-searchsorted offset must bound observation
        # times over all rows, not just the first/last sensor, or queries
        # near one row's tail can land in the next row's block.  The source
        # recedes from the first sensor so that row's observation window
        # stretches far beyond the last row's.
        cfg = ms.PhysicalConfig(final_time=45.0, turnoff_time=35.0)
        grid = np.linspace(0.0, 35.0, 36)
        model = ms.SourceModel.single(
            ms.SampledFunction(grid, -0.1 * grid),
            ms.SampledFunction(grid, np.zeros_like(grid)),
            ms.SampledFunction(grid, np.ones_like(grid), "zero"),
        )
        positions = np.array([[5.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
        times = np.array([42.0, 20.0])
        fallback = _single_source_forward(model.sources[0], positions, times, cfg)
        per_row = np.concatenate([
            _single_source_forward(model.sources[0], positions[i : i + 1], times, cfg)
            for i in range(2)
        ])
        np.testing.assert_allclose(fallback, per_row, rtol=1e-12, atol=0.0)
        pointwise = np.array([ms.evaluate_field(model, p, times, cfg) for p in positions])
        np.testing.assert_allclose(fallback, pointwise, atol=1e-5)  # coarse-grid interp error

    def test_supersonic_contract_violation(self):
        cfg = ms.PhysicalConfig()
        model = linear_source((2.0, 0.0))
        sensors = ms.sphere_sensors(4, 30.0)
        with pytest.raises(ms.SupersonicTrajectoryError):
            ms.forward_map(model, sensors, np.linspace(0, 20, 10), cfg)

    def test_superposition_of_two_sources(self):
        cfg = ms.PhysicalConfig()
        one = stationary_source(position=(0.5, 0.0))
        two = linear_source((0.2, 0.1))
        both = ms.SourceModel(one.sources + two.sources)
        sensors = ms.sphere_sensors(9, 3.0)
        times = np.linspace(0.0, 20.0, 50)
        total = ms.forward_map(both, sensors, times, cfg)
        parts = ms.forward_map(one, sensors, times, cfg) + ms.forward_map(two, sensors, times, cfg)
        np.testing.assert_allclose(total, parts, rtol=1e-14, atol=1e-18)

    def test_observation_monotonicity_for_subsonic(self):
        cfg = ms.PhysicalConfig()
        src = linear_source((0.7, 0.2)).sources[0]
        for sensor in ms.sphere_sensors(5, 3.0).positions:
            r = np.hypot(sensor[0] - src.traj_x.values, sensor[1] - src.traj_y.values)
            r = np.sqrt(r**2 + sensor[2] ** 2)
            observation = src.emission_grid + r / cfg.wave_speed
            assert np.all(np.diff(observation) > 0)


class TestMaxSpeed:
    def test_stationary(self):
        speed, subsonic = ms.max_speed(stationary_source(), ms.PhysicalConfig())
        assert speed == 0.0 and subsonic

    def test_supersonic_flagged(self):
        speed, subsonic = ms.max_speed(linear_source((2.0, 0.0)), ms.PhysicalConfig())
        assert speed == pytest.approx(2.0) and not subsonic


class TestAddNoise:
    def _measurements(self, field_value=0.02, n_s=10, n_t=7):
        sensors = ms.sphere_sensors(n_s, 3.0)
        times = np.linspace(0, 20, n_t)
        field = np.full((n_s, n_t), field_value)
        return ms.MeasurementSet(times, sensors, field)

    def test_zero_level_is_identity(self):
        clean = self._measurements()
        assert ms.add_noise(clean, 0.0, 123) is clean

    def test_hemisphere_area(self):
        assert ms.sphere_sensors(5, 3.0).area == pytest.approx(18 * math.pi)
        assert ms.sphere_sensors(5, 3.0, "quarter").area == pytest.approx(9 * math.pi)

    def test_zero_field_stays_zero(self):
        clean = self._measurements(field_value=0.0)
        noisy = ms.add_noise(clean, 0.5, 123)
        assert np.all(noisy.field == 0.0)

    def test_noise_shared_across_sensors(self):
        clean = self._measurements()
        noisy = ms.add_noise(clean, 0.25, 7)
        perturbation = noisy.field - clean.field
        # one draw per time, identical for every sensor
        np.testing.assert_array_equal(perturbation, np.tile(perturbation[:1], (10, 1)))
        assert np.std(perturbation[0]) > 0

    def test_sigma_is_fraction_of_surface_rms(self):
        clean = self._measurements(field_value=0.02)
        draws = np.array([
            ms.add_noise(clean, 0.5, seed).field[0] - clean.field[0] for seed in range(400)
        ])
        # uniform field: surface RMS equals the field value itself
        assert np.std(draws) == pytest.approx(0.5 * 0.02, rel=0.15)

    def test_deterministic_given_seed(self):
        clean = self._measurements()
        a = ms.add_noise(clean, 0.3, 99).field
        b = ms.add_noise(clean, 0.3, 99).field
        np.testing.assert_array_equal(a, b)


class TestObservationWindowWarning:
    def test_warns_when_final_time_too_short(self):
        cfg = ms.PhysicalConfig(final_time=16.0, turnoff_time=15.0)
        model = stationary_source()
        sensors = ms.sphere_sensors(4, 3.0)
        with pytest.warns(ms.ObservationWindowWarning):
            ms.warn_if_window_short(cfg, sensors, model)

    def test_silent_when_window_is_long_enough(self):
        cfg = ms.PhysicalConfig(final_time=30.0, turnoff_time=15.0)
        model = stationary_source()
        sensors = ms.sphere_sensors(4, 3.0)
        import warnings as w

        with w.catch_warnings():
            w.simplefilter("error")
            ms.warn_if_window_short(cfg, sensors, model)
