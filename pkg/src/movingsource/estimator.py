"""Scikit-learn style front end for the pCN source reconstructor.

``PCNReconstructor.fit`` takes flattened measurements (rows of
(t, x, y, z) against field values) or a :class:`MeasurementSet`, runs one or
more pCN chains, and exposes posterior summaries as fitted attributes.
``predict`` evaluates the posterior-mean model's field at new measurement
coordinates, so the estimator composes with the usual sklearn tooling.
"""

from __future__ import annotations

import os

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import ValidationError
from .gp import SquaredExponentialKernel
from .inference import (
    ChainRecord,
    GaussianLikelihood,
    continue_chain,
    min_probe_ess,
    posterior_mean,
    posterior_mode,
    potential_scale_reduction,
    run_chain,
)
from .scenarios import Scenario, latent_priors
from .wavefield import MeasurementSet, PhysicalConfig, SensorArray, forward_map


def _chain_job(
    likelihood,
    priors,
    n_samples,
    delta,
    master_seed,
    chain_index,
    thin,
    burn_in,
    checkpoint_every,
    checkpoint_path,
    resume,
):
    """Run (or resume) one chain; module-level so joblib can pickle it."""
    if resume and checkpoint_path is not None and os.path.exists(checkpoint_path):
        record = ChainRecord.from_npz(checkpoint_path)
        if record.delta != delta or record.thin != thin:
            raise ValidationError(
                "checkpoint was produced with different sampler settings; cannot resume"
            )
        record = continue_chain(
            record,
            likelihood,
            priors,
            n_samples,
            burn_in=burn_in,
            checkpoint_every=checkpoint_every,
            checkpoint_path=checkpoint_path,
        )
    else:
        seed = np.random.SeedSequence(entropy=master_seed, spawn_key=(0, chain_index))
        record = run_chain(
            likelihood,
            priors,
            n_samples,
            delta,
            seed,
            thin=thin,
            burn_in=burn_in,
            checkpoint_every=checkpoint_every,
            checkpoint_path=checkpoint_path,
        )
    if checkpoint_path is not None:
        record.to_npz(checkpoint_path)
    return record


class PCNReconstructor(BaseEstimator):
    """Bayesian reconstruction of moving point sources from wave-field data.

    Parameters mirror the generative model (wave speed, timing, priors per
    latent function) and the sampler (chains, samples, pCN step size).  Chain
    seeds derive from ``random_state`` by counter-based splitting: chain i
    uses SeedSequence(random_state, spawn_key=(0, i)).

    Fitted attributes: ``posterior_mean_`` and ``posterior_mode_``
    (SourceModel), ``chains_`` (list of ChainRecord), ``priors_``,
    ``acceptance_ratios_`` and ``diagnostics_``.
    """

    def __init__(
        self,
        *,
        wave_speed=1.0,
        final_time=20.0,
        turnoff_time=15.0,
        n_sources=1,
        grid_size=100,
        trajectory_magnitude=1.0,
        trajectory_length_scale=15.0,
        intensity_magnitude=1.0,
        intensity_length_scale=15.0,
        closed_curve=False,
        precision=100.0,
        step_size=0.0025,
        n_chains=2,
        n_samples=20000,
        burn_in=0.5,
        thin=10,
        random_state=0,
        n_jobs=1,
        checkpoint_dir=None,
        checkpoint_every=0,
        resume=False,
    ):
        self.wave_speed = wave_speed
        self.final_time = final_time
        self.turnoff_time = turnoff_time
        self.n_sources = n_sources
        self.grid_size = grid_size
        self.trajectory_magnitude = trajectory_magnitude
        self.trajectory_length_scale = trajectory_length_scale
        self.intensity_magnitude = intensity_magnitude
        self.intensity_length_scale = intensity_length_scale
        self.closed_curve = closed_curve
        self.precision = precision
        self.step_size = step_size
        self.n_chains = n_chains
        self.n_samples = n_samples
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.checkpoint_dir = checkpoint_dir
        self.checkpoint_every = checkpoint_every
        self.resume = resume

    @classmethod
    def from_scenario(cls, scenario: Scenario, **options) -> "PCNReconstructor":
        """Estimator whose model settings match a benchmark scenario."""
        params = dict(
            wave_speed=scenario.cfg.wave_speed,
            final_time=scenario.cfg.final_time,
            turnoff_time=scenario.cfg.turnoff_time,
            n_sources=scenario.n_sources,
            trajectory_magnitude=scenario.trajectory_magnitude,
            trajectory_length_scale=scenario.trajectory_length_scale,
            intensity_magnitude=scenario.intensity_magnitude,
            intensity_length_scale=scenario.intensity_length_scale,
            closed_curve=scenario.closed_curve,
            precision=scenario.precision,
            step_size=scenario.step,
        )
        params.update(options)
        return cls(**params)

    # ------------------------------------------------------------------

    def _validate_run_params(self):
        if not 0 <= self.burn_in < 1:
            raise ValidationError("burn_in must be a fraction in [0, 1)")
        if self.n_chains < 1:
            raise ValidationError("n_chains must be >= 1")
        if self.n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        if self.n_sources < 1:
            raise ValidationError("n_sources must be >= 1")

    def _grid_from_rows(self, X, y) -> MeasurementSet:
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 4:
            raise ValidationError("X must have columns (t, x, y, z)")
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValidationError("X and y must have the same number of rows")
        times, t_inv = np.unique(X[:, 0], return_inverse=True)
        xyz, s_inv = np.unique(X[:, 1:], axis=0, return_inverse=True)
        field = np.full((xyz.shape[0], times.shape[0]), np.nan)
        field[s_inv, t_inv] = y
        if np.isnan(field).any():
            raise ValidationError("X must cover a complete sensors x times grid")
        radius = float(np.linalg.norm(xyz, axis=1).mean())
        sensors = SensorArray(xyz, radius=max(radius, 1e-12), region="custom")
        return MeasurementSet(times, sensors, field)

    def fit(self, X, y):
        """Reconstruct from flattened measurements (rows (t, x, y, z) vs y)."""
        return self.fit_measurements(self._grid_from_rows(X, y))

    def fit_measurements(self, measurements: MeasurementSet):
        """Reconstruct from a gridded measurement set."""
        self._validate_run_params()
        cfg = PhysicalConfig(self.wave_speed, self.final_time, self.turnoff_time)
        priors = latent_priors(
            cfg.turnoff_time,
            self.n_sources,
            SquaredExponentialKernel(self.trajectory_magnitude, self.trajectory_length_scale),
            SquaredExponentialKernel(self.intensity_magnitude, self.intensity_length_scale),
            closed_curve=self.closed_curve,
            grid_size=self.grid_size,
        )
        likelihood = GaussianLikelihood(measurements, cfg, self.precision)
        burn_index = int(round(self.burn_in * self.n_samples))
        if self.checkpoint_dir is not None:
            os.makedirs(self.checkpoint_dir, exist_ok=True)

        def args(i):
            path = (
                os.path.join(self.checkpoint_dir, f"chain_{i:02d}.npz")
                if self.checkpoint_dir is not None
                else None
            )
            return (
                likelihood,
                priors,
                self.n_samples,
                self.step_size,
                self.random_state,
                i,
                self.thin,
                burn_index,
                self.checkpoint_every,
                path,
                self.resume,
            )

        if self.n_jobs == 1:
            records = [_chain_job(*args(i)) for i in range(self.n_chains)]
        else:
            records = Parallel(n_jobs=self.n_jobs)(
                delayed(_chain_job)(*args(i)) for i in range(self.n_chains)
            )

        self.cfg_ = cfg
        self.measurements_ = measurements
        self.priors_ = priors
        self.chains_ = records
        self.posterior_mean_ = posterior_mean(records, priors)
        self.posterior_mode_ = posterior_mode(records, priors)
        self.acceptance_ratios_ = [r.acceptance_ratio for r in records]
        self.diagnostics_ = self._diagnostics(records)
        return self

    def _diagnostics(self, records) -> dict:
        diag = {"acceptance_ratios": [r.acceptance_ratio for r in records]}
        try:
            diag["min_ess"] = [min_probe_ess(r) for r in records]
        except ValidationError:
            diag["min_ess"] = None
        if len(records) >= 2:
            traces = [r.probe_values[r.burn_in :, 0] for r in records]
            try:
                diag["rhat_log_likelihood"] = potential_scale_reduction(traces)
            except ValidationError:
                diag["rhat_log_likelihood"] = None
        return diag

    # ------------------------------------------------------------------

    def predict(self, X) -> np.ndarray:
        """Field of the posterior-mean model at rows (t, x, y, z)."""
        check_is_fitted(self, "posterior_mean_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 4:
            raise ValidationError("X must have columns (t, x, y, z)")
        out = np.empty(X.shape[0])
        xyz, s_inv = np.unique(X[:, 1:], axis=0, return_inverse=True)
        for i in range(xyz.shape[0]):
            mask = s_inv == i
            out[mask] = forward_map(self.posterior_mean_, xyz[i : i + 1], X[mask, 0], self.cfg_)[0]
        return out

    def score(self, X, y) -> float:
        """Negative RMS field residual (larger is better)."""
        y = np.asarray(y, dtype=float).ravel()
        residual = y - self.predict(X)
        return -float(np.sqrt(np.mean(residual**2)))
