import math
import warnings

import numpy as np
import pytest

import movingsource as ms
from movingsource.scenarios import CASE_NAMES, resolve_case


class TestSphereSensors:
    def test_hemisphere_count_radius_and_side(self):
        array = ms.sphere_sensors(424, 3.0, "hemisphere")
        assert array.positions.shape == (424, 3)
        np.testing.assert_allclose(np.linalg.norm(array.positions, axis=1), 3.0, rtol=1e-12)
        assert np.all(array.positions[:, 2] > 0)

    def test_quarter_sphere_constraints(self):
        array = ms.sphere_sensors(213, 3.0, "quarter")
        assert array.positions.shape == (213, 3)
        np.testing.assert_allclose(np.linalg.norm(array.positions, axis=1), 3.0, rtol=1e-12)
        assert np.all(array.positions[:, 2] > 0)
        assert np.all(array.positions[:, 1] > 0)

    def test_single_sensor_sits_at_pole(self):
        np.testing.assert_allclose(
            ms.sphere_sensors(1, 2.0, "hemisphere").positions, [[0.0, 0.0, 2.0]]
        )
        quarter = ms.sphere_sensors(1, 2.0, "quarter").positions[0]
        np.testing.assert_allclose(quarter, [0.0, math.sqrt(2.0), math.sqrt(2.0)])

    def test_deterministic_and_scale_equivariant(self):
        a = ms.sphere_sensors(50, 3.0).positions
        b = ms.sphere_sensors(50, 3.0).positions
        np.testing.assert_array_equal(a, b)
        scaled = ms.sphere_sensors(50, 6.0).positions
        np.testing.assert_array_equal(scaled, 2.0 * a)

    def test_rough_uniformity(self):
        # equal-area z bands should hold about the same number of sensors
        z = ms.sphere_sensors(400, 1.0).positions[:, 2]
        counts, _ = np.histogram(z, bins=np.linspace(0, 1, 5))
        assert counts.min() > 80 and counts.max() < 120

    def test_validation(self):
        with pytest.raises(ms.ValidationError):
            ms.sphere_sensors(0, 3.0)
        with pytest.raises(ms.ValidationError):
            ms.sphere_sensors(5, 3.0, "octant")


class TestBuildCase:
    def test_names_and_ids_resolve(self):
        for cid, name in CASE_NAMES.items():
            assert resolve_case(cid) == cid
            assert resolve_case(name) == cid
        with pytest.raises(ms.ValidationError):
            resolve_case("spiral")
        with pytest.raises(ms.ValidationError):
            ms.build_case(7)

    def test_unknown_override_rejected(self):
        with pytest.raises(ms.ValidationError):
            ms.build_case("line", bogus=3)

    def test_arc_truth_values(self):
        sc = ms.build_case("arc")
        src = sc.truth.sources[0]
        assert src.traj_x(0.0) == pytest.approx(0.0, abs=1e-12)
        assert src.traj_y(0.0) == pytest.approx(0.0, abs=1e-12)
        assert src.intensity(0.0) == pytest.approx(0.0, abs=1e-12)
        # polynomial pulse nearly closes at turn-off: printed coefficients sum to 0.01
        assert src.intensity(15.0) == pytest.approx(0.01, abs=1e-9)

    def test_two_source_truth_values(self):
        sc = ms.build_case("two_sources")
        assert sc.n_sources == 2
        first, second = sc.truth.sources
        assert first.traj_x(15.0) == pytest.approx(-3.0, abs=1e-9)
        assert first.traj_y(15.0) == pytest.approx(0.0, abs=1e-12)
        assert second.traj_x(0.0) == pytest.approx(1.5)
        assert first.intensity(7.5) == 1.0

    def test_loop_trajectory_is_closed(self):
        sc = ms.build_case("loop")
        src = sc.truth.sources[0]
        assert abs(src.traj_x(35.0) - src.traj_x(0.0)) <= 1e-9
        assert abs(src.traj_y(35.0) - src.traj_y(0.0)) <= 1e-9
        assert sc.cfg.final_time == 40.0 and sc.cfg.turnoff_time == 35.0
        assert sc.trajectory_magnitude == pytest.approx(1.2)

    @pytest.mark.parametrize("case", [1, 2, 3, 4])
    def test_every_case_is_subsonic(self, case):
        sc = ms.build_case(case)
        speed, subsonic = ms.max_speed(sc.truth, sc.cfg)
        assert subsonic and speed < 1.0

    def test_line_speed(self):
        sc = ms.build_case("line")
        speed, subsonic = ms.max_speed(sc.truth, sc.cfg)
        assert subsonic and speed == pytest.approx(0.15, rel=1e-12)

    def test_line_velocity_override(self):
        sc = ms.build_case("line", velocity=(0.0, 0.15))
        src = sc.truth.sources[0]
        assert src.traj_x(10.0) == pytest.approx(0.0, abs=1e-12)
        assert src.traj_y(10.0) == pytest.approx(1.5)
        with pytest.raises(ms.ValidationError):
            ms.build_case("line", velocity=(1.5, 0.0))

    def test_default_sensor_setup(self):
        sc = ms.build_case("line")
        assert sc.sensors.n_sensors == 424
        assert sc.sensors.region == "hemisphere"
        assert sc.sensors.radius == 3.0

    def test_supersonic_truth_rejected_by_scenario(self):
        with pytest.raises(ms.ValidationError):
            ms.build_case("line", wave_speed=0.1)


class TestSynthesizeMeasurements:
    def test_line_case_warns_about_window(self):
        sc = ms.build_case("line", n_sensors=16, truth_grid_size=60)
        with pytest.warns(ms.ObservationWindowWarning):
            ms.synthesize_measurements(sc, 0)

    def test_clean_and_noisy_shapes(self):
        sc = ms.build_case("line", n_sensors=12, n_times=40, truth_grid_size=60,
                           noise_level=0.25, final_time=30.0)
        clean, noisy = ms.synthesize_measurements(sc, 3)
        assert clean.field.shape == (12, 40)
        assert noisy.field.shape == (12, 40)
        assert noisy.noise_level == 0.25
        assert not np.array_equal(clean.field, noisy.field)

    def test_noise_stream_deterministic(self):
        sc = ms.build_case("line", n_sensors=8, n_times=20, truth_grid_size=60,
                           noise_level=0.1, final_time=30.0)
        _, a = ms.synthesize_measurements(sc, 7)
        _, b = ms.synthesize_measurements(sc, 7)
        np.testing.assert_array_equal(a.field, b.field)

    @pytest.mark.parametrize("case,extended_final", [(1, 30.0), (2, 30.0), (3, 50.0), (4, 30.0)])
    def test_late_time_silence(self, case, extended_final):
        sc = ms.build_case(case, n_sensors=24, n_times=120, truth_grid_size=80,
                           final_time=extended_final)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            clean, _ = ms.synthesize_measurements(sc, 0)
        ranges = []
        for src in sc.truth.sources:
            dx = sc.sensors.positions[:, 0, None] - src.traj_x.values[None, :]
            dy = sc.sensors.positions[:, 1, None] - src.traj_y.values[None, :]
            r = np.sqrt(dx**2 + dy**2 + sc.sensors.positions[:, 2, None] ** 2)
            ranges.append(r.max())
        silent_after = sc.cfg.turnoff_time + max(ranges) / sc.cfg.wave_speed
        late = sc.measurement_times > silent_after
        assert late.any()
        assert np.all(clean.field[:, late] == 0.0)


class TestMetrics:
    def _models(self):
        grid = np.linspace(0.0, 15.0, 40)
        truth = ms.SourceModel.single(
            ms.SampledFunction(grid, 0.1 * grid),
            ms.SampledFunction(grid, np.sin(grid)),
            ms.SampledFunction(grid, np.ones(40), "zero"),
        )
        return grid, truth

    def test_zero_for_identical(self):
        _, truth = self._models()
        assert ms.trajectory_error(truth, truth) == 0.0
        assert ms.intensity_error(truth, truth) == 0.0

    def test_constant_offsets(self):
        grid, truth = self._models()
        shifted = ms.SourceModel.single(
            truth.sources[0].traj_x.with_values(truth.sources[0].traj_x.values + 0.3),
            truth.sources[0].traj_y,
            truth.sources[0].intensity.with_values(truth.sources[0].intensity.values - 0.2),
        )
        assert ms.trajectory_error(shifted, truth) == pytest.approx(0.3, rel=1e-12)
        assert ms.intensity_error(shifted, truth) == pytest.approx(0.2, rel=1e-12)

    def test_translation_invariance(self):
        grid, truth = self._models()
        estimate = ms.SourceModel.single(
            truth.sources[0].traj_x.with_values(truth.sources[0].traj_x.values + 0.4),
            truth.sources[0].traj_y.with_values(truth.sources[0].traj_y.values - 0.1),
            truth.sources[0].intensity,
        )
        base = ms.trajectory_error(estimate, truth)

        def translate(model, dx, dy):
            src = model.sources[0]
            return ms.SourceModel.single(
                src.traj_x.with_values(src.traj_x.values + dx),
                src.traj_y.with_values(src.traj_y.values + dy),
                src.intensity,
            )

        moved = ms.trajectory_error(translate(estimate, 2.0, -1.0), translate(truth, 2.0, -1.0))
        assert moved == pytest.approx(base, rel=1e-12)

    def test_source_count_mismatch(self):
        _, truth = self._models()
        double = ms.SourceModel(truth.sources + truth.sources)
        with pytest.raises(ms.ValidationError):
            ms.trajectory_error(double, truth)

    def test_grid_beyond_span_rejected(self):
        _, truth = self._models()
        with pytest.raises(ms.ValidationError):
            ms.trajectory_error(truth, truth, grid=np.linspace(0, 20, 10))

    def test_wavefield_error_zero_for_truth(self):
        sc = ms.build_case("line", n_sensors=10, n_times=30, truth_grid_size=60,
                           final_time=30.0)
        clean, _ = ms.synthesize_measurements(sc, 0)
        assert ms.wavefield_error(sc.truth, clean, sc.cfg) == 0.0

    def test_wavefield_error_of_silent_model_is_data_rms(self):
        sc = ms.build_case("line", n_sensors=10, n_times=30, truth_grid_size=60,
                           final_time=30.0)
        clean, _ = ms.synthesize_measurements(sc, 0)
        src = sc.truth.sources[0]
        silent = ms.SourceModel.single(
            src.traj_x, src.traj_y, src.intensity.with_values(np.zeros(60))
        )
        expected = float(np.sqrt(np.mean(clean.field**2)))
        assert ms.wavefield_error(silent, clean, sc.cfg) == pytest.approx(expected, rel=1e-12)


class TestScenarioPriors:
    def test_shapes_and_modes(self):
        sc = ms.build_case("line")
        priors = ms.scenario_priors(sc, 30)
        assert len(priors) == 3
        assert priors[0].extrapolation == "clamp"
        assert priors[2].extrapolation == "zero"
        assert priors[0].size == 30
        assert priors[0].grid[-1] == sc.cfg.turnoff_time

    def test_closed_curve_conditioning_applied(self):
        sc = ms.build_case("loop", closed_curve=True)
        priors = ms.scenario_priors(sc, 25)
        assert priors[0].conditioned and priors[1].conditioned
        assert not priors[2].conditioned
        fn = priors[0].sample(np.random.default_rng(0))
        assert abs(fn.values[-1] - fn.values[0]) <= 1e-8

    def test_two_sources_give_six_priors(self):
        sc = ms.build_case("two_sources")
        assert len(ms.scenario_priors(sc, 20)) == 6
