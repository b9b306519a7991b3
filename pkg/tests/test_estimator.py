import warnings

import numpy as np
import pytest
from sklearn.base import clone

import movingsource as ms


def tiny_scenario(**overrides):
    defaults = dict(n_sensors=14, n_times=25, truth_grid_size=60, final_time=30.0)
    defaults.update(overrides)
    return ms.build_case("line", **defaults)


def tiny_estimator(scenario, **options):
    defaults = dict(grid_size=20, n_chains=2, n_samples=40, burn_in=0.5, thin=2,
                    random_state=0)
    defaults.update(options)
    return ms.PCNReconstructor.from_scenario(scenario, **defaults)


@pytest.fixture(scope="module")
def fitted():
    scenario = tiny_scenario()
    clean, _ = ms.synthesize_measurements(scenario, 0)
    est = tiny_estimator(scenario).fit_measurements(clean)
    return scenario, clean, est


class TestSklearnProtocol:
    def test_get_params_roundtrip(self):
        est = ms.PCNReconstructor(n_samples=123, trajectory_length_scale=7.0)
        params = est.get_params()
        assert params["n_samples"] == 123
        est2 = ms.PCNReconstructor(**params)
        assert est2.get_params() == params

    def test_set_params_and_clone(self):
        est = ms.PCNReconstructor()
        est.set_params(n_chains=5)
        assert est.n_chains == 5
        assert clone(est).n_chains == 5

    def test_from_scenario_copies_hyperparameters(self):
        scenario = ms.build_case("loop", closed_curve=True)
        est = ms.PCNReconstructor.from_scenario(scenario)
        assert est.trajectory_magnitude == pytest.approx(1.2)
        assert est.turnoff_time == 35.0
        assert est.closed_curve is True
        assert est.step_size == pytest.approx(0.001)


class TestFit:
    def test_fitted_attributes(self, fitted):
        scenario, clean, est = fitted
        assert len(est.chains_) == 2
        assert est.posterior_mean_.n_sources == 1
        assert est.posterior_mode_.n_sources == 1
        assert len(est.acceptance_ratios_) == 2
        assert est.priors_[0].size == 20
        assert est.chains_[0].burn_in == 20

    def test_fit_rows_equals_fit_measurements(self, fitted):
        scenario, clean, est = fitted
        times, xyz = clean.times, clean.sensors.positions
        tt, ss = np.meshgrid(times, np.arange(xyz.shape[0]))
        X = np.column_stack([tt.ravel(), xyz[ss.ravel()]])
        y = clean.field.ravel()
        est2 = tiny_estimator(scenario).fit(X, y)
        np.testing.assert_allclose(
            est2.posterior_mean_.sources[0].traj_x.values,
            est.posterior_mean_.sources[0].traj_x.values,
            atol=1e-9,
        )

    def test_incomplete_grid_rejected(self, fitted):
        scenario, clean, _ = fitted
        times, xyz = clean.times, clean.sensors.positions
        tt, ss = np.meshgrid(times, np.arange(xyz.shape[0]))
        X = np.column_stack([tt.ravel(), xyz[ss.ravel()]])[:-3]
        y = clean.field.ravel()[:-3]
        with pytest.raises(ms.ValidationError):
            tiny_estimator(scenario).fit(X, y)

    def test_determinism(self, fitted):
        scenario, clean, est = fitted
        est2 = tiny_estimator(scenario).fit_measurements(clean)
        np.testing.assert_array_equal(
            est2.posterior_mean_.sources[0].intensity.values,
            est.posterior_mean_.sources[0].intensity.values,
        )

    def test_parallel_chains_match_sequential(self, fitted):
        scenario, clean, est = fitted
        par = tiny_estimator(scenario, n_jobs=2).fit_measurements(clean)
        for a, b in zip(par.chains_, est.chains_):
            np.testing.assert_array_equal(a.kept_coeffs, b.kept_coeffs)
            np.testing.assert_array_equal(a.log_likelihoods, b.log_likelihoods)

    def test_single_sample_summaries_equal_prior_draw(self):
        scenario = tiny_scenario()
        clean, _ = ms.synthesize_measurements(scenario, 0)
        est = tiny_estimator(scenario, n_chains=1, n_samples=1).fit_measurements(clean)
        seed = np.random.SeedSequence(entropy=0, spawn_key=(0, 0))
        draw = np.random.default_rng(seed).standard_normal((3, 20))
        expected = ms.realize_state(est.priors_, draw)
        np.testing.assert_array_equal(
            est.posterior_mean_.sources[0].traj_x.values,
            expected.sources[0].traj_x.values,
        )
        np.testing.assert_array_equal(
            est.posterior_mode_.sources[0].intensity.values,
            expected.sources[0].intensity.values,
        )

    def test_bad_run_params(self):
        scenario = tiny_scenario()
        clean, _ = ms.synthesize_measurements(scenario, 0)
        with pytest.raises(ms.ValidationError):
            tiny_estimator(scenario, burn_in=1.0).fit_measurements(clean)
        with pytest.raises(ms.ValidationError):
            tiny_estimator(scenario, n_chains=0).fit_measurements(clean)


class TestPredictScore:
    def test_predict_matches_forward_map(self, fitted):
        scenario, clean, est = fitted
        sensor = clean.sensors.positions[3]
        times = np.array([4.0, 7.5, 11.0])
        X = np.column_stack([times, np.tile(sensor, (3, 1))])
        expected = ms.forward_map(
            est.posterior_mean_, sensor[None, :], times, est.cfg_
        )[0]
        np.testing.assert_allclose(est.predict(X), expected, atol=1e-14)

    def test_score_is_negative_rms(self, fitted):
        scenario, clean, est = fitted
        times, xyz = clean.times, clean.sensors.positions
        tt, ss = np.meshgrid(times, np.arange(xyz.shape[0]))
        X = np.column_stack([tt.ravel(), xyz[ss.ravel()]])
        y = clean.field.ravel()
        score = est.score(X, y)
        assert -1.0 < score <= 0.0
        residual = y - est.predict(X)
        assert score == pytest.approx(-np.sqrt(np.mean(residual**2)))

    def test_predict_requires_fit(self):
        with pytest.raises(Exception):
            ms.PCNReconstructor().predict(np.zeros((2, 4)))


class TestCheckpointResume:
    def test_resume_reproduces_uninterrupted_fit(self, tmp_path):
        scenario = tiny_scenario()
        clean, _ = ms.synthesize_measurements(scenario, 0)
        full = tiny_estimator(scenario, n_samples=60).fit_measurements(clean)
        tiny_estimator(
            scenario, n_samples=25, checkpoint_dir=str(tmp_path)
        ).fit_measurements(clean)
        resumed = tiny_estimator(
            scenario, n_samples=60, checkpoint_dir=str(tmp_path), resume=True
        ).fit_measurements(clean)
        for a, b in zip(full.chains_, resumed.chains_):
            np.testing.assert_array_equal(a.kept_coeffs, b.kept_coeffs)
            np.testing.assert_array_equal(a.log_likelihoods, b.log_likelihoods)

    def test_resume_with_different_settings_rejected(self, tmp_path):
        scenario = tiny_scenario()
        clean, _ = ms.synthesize_measurements(scenario, 0)
        tiny_estimator(scenario, n_samples=25, checkpoint_dir=str(tmp_path)).fit_measurements(clean)
        bad = tiny_estimator(scenario, n_samples=60, thin=5,
                             checkpoint_dir=str(tmp_path), resume=True)
        with pytest.raises(ms.ValidationError):
            bad.fit_measurements(clean)
