"""Function-space MCMC for source reconstruction.

The chain state lives in whitened coordinates: each latent function is
parametrized as f = m + L s with s ~ N(0, I) under its Gaussian prior.  The
pre-conditioned Crank-Nicolson proposal mixes the current coordinates with a
fresh standard-normal draw,

    s* = sqrt(1 - 2 delta) s + sqrt(2 delta) z,

and accepts with probability min(1, exp(L(f*) - L(f))) computed from the
log-likelihood alone.  Because realization is affine, this is the plain
function-space scheme for zero-mean priors and stays correct for conditioned
(nonzero-mean) priors, whose constraints every proposal then satisfies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    NearFieldError,
    RetardedTimeError,
    SupersonicTrajectoryError,
    ValidationError,
)
from .gp import GaussianProcessPrior
from .validation import as_float_array, check_positive
from .wavefield import MeasurementSet, PhysicalConfig, PointSource, SourceModel, forward_map

CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# states and likelihood
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LatentState:
    """Whitened coordinates with their realized model and cached log-likelihood."""

    coeffs: np.ndarray  # (n_latent, grid size)
    model: SourceModel
    log_likelihood: float


def realize_state(priors: list[GaussianProcessPrior], coeffs: np.ndarray) -> SourceModel:
    """Realize whitened coordinates into a SourceModel.

    Priors come in groups of three per source: x-trajectory, y-trajectory,
    intensity.
    """
    n_sources, rem = divmod(len(priors), 3)
    if rem != 0 or n_sources < 1:
        raise ValidationError("priors must come in (traj_x, traj_y, intensity) triples")
    sources = []
    for s in range(n_sources):
        px, py, pq = priors[3 * s : 3 * s + 3]
        sources.append(
            PointSource(px.realize(coeffs[3 * s]), py.realize(coeffs[3 * s + 1]), pq.realize(coeffs[3 * s + 2]))
        )
    return SourceModel(tuple(sources))


class GaussianLikelihood:
    """Measurement log-likelihood -precision/2 ||U - G(f)||^2 over all entries.

    Forward-map failures (supersonic proposal, near-field hit) score -inf so
    the sample is rejected rather than aborting the chain.
    """

    def __init__(self, measurements: MeasurementSet, cfg: PhysicalConfig, precision: float):
        self.measurements = measurements
        self.cfg = cfg
        self.precision = check_positive("precision", precision)

    def __call__(self, source_model: SourceModel) -> float:
        try:
            predicted = forward_map(
                source_model, self.measurements.sensors, self.measurements.times, self.cfg
            )
        except (SupersonicTrajectoryError, NearFieldError, RetardedTimeError):
            return float("-inf")
        residual = predicted - self.measurements.field
        return -0.5 * self.precision * float(np.vdot(residual, residual))


def log_likelihood(
    source_model: SourceModel, measurements: MeasurementSet, precision: float, cfg: PhysicalConfig
) -> float:
    return GaussianLikelihood(measurements, cfg, precision)(source_model)


# --------------------------------------------------------------------------
# pCN stepping
# --------------------------------------------------------------------------

def pcn_step(
    state: LatentState,
    delta: float,
    priors: list[GaussianProcessPrior],
    log_likelihood_fn,
    rng: np.random.Generator,
) -> tuple[LatentState, bool]:
    """One pCN proposal/accept step; returns the (possibly unchanged) state.

    Draw order is fixed (proposal normals, then one uniform) so chains are
    reproducible from the generator state alone.
    """
    if not 0.0 < delta <= 0.5:
        raise ValidationError(f"delta must be in (0, 1/2], got {delta}")
    mix_old = math.sqrt(1.0 - 2.0 * delta)
    mix_new = math.sqrt(2.0 * delta)
    proposal = mix_old * state.coeffs + mix_new * rng.standard_normal(state.coeffs.shape)
    model = realize_state(priors, proposal)
    proposal_ll = log_likelihood_fn(model)
    u = rng.random()
    gain = proposal_ll - state.log_likelihood
    if math.isnan(gain):  # both -inf: keep looking from the current mixture
        return state, False
    if gain >= 0.0 or u < math.exp(gain):
        return LatentState(proposal, model, proposal_ll), True
    return state, False


# --------------------------------------------------------------------------
# chain records
# --------------------------------------------------------------------------

@dataclass
class ChainRecord:
    """One pCN chain: thinned whitened snapshots plus full scalar traces.

    ``n_samples`` counts chain states including the initial prior draw, so a
    record with n_samples = 1 holds only that draw.  ``final_*`` and
    ``rng_state`` allow bit-exact continuation.
    """

    seed: object
    delta: float
    thin: int
    burn_in: int
    n_samples: int
    kept_steps: np.ndarray
    kept_coeffs: np.ndarray
    log_likelihoods: np.ndarray
    accepted: np.ndarray
    probe_names: list[str]
    probe_values: np.ndarray
    final_coeffs: np.ndarray
    final_log_likelihood: float
    rng_state: dict = field(repr=False)

    @property
    def acceptance_ratio(self) -> float:
        return float(self.accepted.mean()) if self.accepted.size else 0.0

    def retained_coeffs(self, burn_in: int | None = None) -> np.ndarray:
        cut = self.burn_in if burn_in is None else int(burn_in)
        return self.kept_coeffs[self.kept_steps >= cut]

    def to_npz(self, path) -> None:
        meta = {
            "version": CHECKPOINT_VERSION,
            "seed": self.seed,
            "delta": self.delta,
            "thin": self.thin,
            "burn_in": self.burn_in,
            "n_samples": self.n_samples,
            "probe_names": self.probe_names,
            "final_log_likelihood": self.final_log_likelihood,
            "rng_state": self.rng_state,
        }
        np.savez(
            path,
            kept_steps=self.kept_steps,
            kept_coeffs=self.kept_coeffs,
            log_likelihoods=self.log_likelihoods,
            accepted=self.accepted,
            probe_values=self.probe_values,
            final_coeffs=self.final_coeffs,
            meta=np.array(json.dumps(meta)),
        )

    @classmethod
    def from_npz(cls, path) -> "ChainRecord":
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValidationError(
                    f"checkpoint version {meta.get('version')} != supported {CHECKPOINT_VERSION}"
                )
            return cls(
                seed=meta["seed"],
                delta=meta["delta"],
                thin=meta["thin"],
                burn_in=meta["burn_in"],
                n_samples=meta["n_samples"],
                kept_steps=data["kept_steps"],
                kept_coeffs=data["kept_coeffs"],
                log_likelihoods=data["log_likelihoods"],
                accepted=data["accepted"],
                probe_names=list(meta["probe_names"]),
                probe_values=data["probe_values"],
                final_coeffs=data["final_coeffs"],
                final_log_likelihood=meta["final_log_likelihood"],
                rng_state=meta["rng_state"],
            )


def _probe_indices(m: int) -> list[int]:
    return sorted({m // 4, m // 2, (3 * m) // 4})


def _latent_values(model: SourceModel) -> list[np.ndarray]:
    values = []
    for src in model.sources:
        values += [src.traj_x.values, src.traj_y.values, src.intensity.values]
    return values


def _seed_spec(seed) -> object:
    if seed is None or isinstance(seed, int):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return repr(seed)


class _ChainStore:
    """Growable trace arrays for one chain, shared by run and continuation."""

    def __init__(self, n_samples, n_latent, m, *, seed, delta, thin, burn_in):
        self.n_samples = n_samples
        self.delta = delta
        self.thin = thin
        self.burn_in = burn_in
        self.seed = seed
        self.log_likelihoods = np.empty(n_samples)
        self.accepted = np.zeros(max(n_samples - 1, 0), dtype=bool)
        self.idx = _probe_indices(m)
        self.probe_names = ["log_likelihood"] + [
            f"latent{j}@{i}" for j in range(n_latent) for i in self.idx
        ]
        self.probe_values = np.empty((n_samples, len(self.probe_names)))
        self.kept_steps: list[int] = []
        self.kept_coeffs: list[np.ndarray] = []

    @classmethod
    def from_record(cls, record: ChainRecord, n_samples: int) -> "_ChainStore":
        n_latent, m = record.final_coeffs.shape
        store = cls(
            n_samples,
            n_latent,
            m,
            seed=record.seed,
            delta=record.delta,
            thin=record.thin,
            burn_in=record.burn_in,
        )
        old = record.n_samples
        store.log_likelihoods[:old] = record.log_likelihoods
        store.accepted[: old - 1] = record.accepted
        store.probe_values[:old] = record.probe_values
        store.kept_steps = list(record.kept_steps)
        store.kept_coeffs = list(record.kept_coeffs)
        return store

    def record(self, k: int, state: LatentState, accepted: bool | None) -> None:
        self.log_likelihoods[k] = state.log_likelihood
        if accepted is not None:
            self.accepted[k - 1] = accepted
        row = [state.log_likelihood]
        for values in _latent_values(state.model):
            row.extend(values[self.idx])
        self.probe_values[k] = row
        if k % self.thin == 0:
            self.kept_steps.append(k)
            self.kept_coeffs.append(state.coeffs.copy())

    def snapshot(self, upto: int, state: LatentState, rng: np.random.Generator) -> ChainRecord:
        return ChainRecord(
            seed=self.seed,
            delta=self.delta,
            thin=self.thin,
            burn_in=self.burn_in,
            n_samples=upto,
            kept_steps=np.array(self.kept_steps, dtype=int),
            kept_coeffs=np.array(self.kept_coeffs),
            log_likelihoods=self.log_likelihoods[:upto].copy(),
            accepted=self.accepted[: upto - 1].copy(),
            probe_names=list(self.probe_names),
            probe_values=self.probe_values[:upto].copy(),
            final_coeffs=state.coeffs.copy(),
            final_log_likelihood=state.log_likelihood,
            rng_state=rng.bit_generator.state,
        )


def _advance(
    store: _ChainStore,
    state: LatentState,
    rng: np.random.Generator,
    log_likelihood_fn,
    priors,
    start: int,
    checkpoint_every: int = 0,
    checkpoint_path=None,
) -> ChainRecord:
    for k in range(start, store.n_samples):
        state, accepted = pcn_step(state, store.delta, priors, log_likelihood_fn, rng)
        store.record(k, state, accepted)
        if (
            checkpoint_every
            and checkpoint_path is not None
            and (k + 1) % checkpoint_every == 0
            and k + 1 < store.n_samples
        ):
            store.snapshot(k + 1, state, rng).to_npz(checkpoint_path)
    return store.snapshot(store.n_samples, state, rng)


def _check_priors(priors) -> tuple[int, int]:
    if len(priors) % 3 != 0 or not priors:
        raise ValidationError("priors must come in (traj_x, traj_y, intensity) triples")
    sizes = {p.size for p in priors}
    if len(sizes) != 1:
        raise ValidationError("all priors must share one emission grid size")
    return len(priors), priors[0].size


def run_chain(
    log_likelihood_fn,
    priors: list[GaussianProcessPrior],
    n_samples: int,
    delta: float,
    seed,
    *,
    thin: int = 10,
    burn_in: int = 0,
    checkpoint_every: int = 0,
    checkpoint_path=None,
) -> ChainRecord:
    """Run one pCN chain started from a fresh prior draw.

    Deterministic for a fixed seed.  Scalar diagnostics (log-likelihood and
    latent values at grid quartiles) are traced at every sample; whitened
    snapshots are kept every ``thin`` samples to bound memory.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    if thin < 1:
        raise ValidationError("thin must be >= 1")
    n_latent, m = _check_priors(priors)
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((n_latent, m))
    model = realize_state(priors, coeffs)
    state = LatentState(coeffs, model, log_likelihood_fn(model))
    store = _ChainStore(
        n_samples, n_latent, m, seed=_seed_spec(seed), delta=delta, thin=thin, burn_in=burn_in
    )
    store.record(0, state, accepted=None)
    return _advance(
        store, state, rng, log_likelihood_fn, priors, 1, checkpoint_every, checkpoint_path
    )


def continue_chain(
    record: ChainRecord,
    log_likelihood_fn,
    priors: list[GaussianProcessPrior],
    n_samples: int,
    *,
    burn_in: int | None = None,
    checkpoint_every: int = 0,
    checkpoint_path=None,
) -> ChainRecord:
    """Extend a recorded chain to ``n_samples`` total, bit-identically.

    Resuming reproduces exactly what an uninterrupted run would have
    produced, because the generator state was checkpointed.  ``burn_in``
    replaces the record's value (it normally scales with the target length).
    """
    if n_samples < record.n_samples:
        raise ValidationError(
            f"target n_samples {n_samples} is shorter than the record ({record.n_samples})"
        )
    if n_samples == record.n_samples and (burn_in is None or burn_in == record.burn_in):
        return record
    _check_priors(priors)
    rng = np.random.default_rng()
    rng.bit_generator.state = record.rng_state
    state = LatentState(
        record.final_coeffs.copy(),
        realize_state(priors, record.final_coeffs),
        record.final_log_likelihood,
    )
    store = _ChainStore.from_record(record, n_samples)
    if burn_in is not None:
        store.burn_in = int(burn_in)
    return _advance(
        store,
        state,
        rng,
        log_likelihood_fn,
        priors,
        record.n_samples,
        checkpoint_every,
        checkpoint_path,
    )


# --------------------------------------------------------------------------
# posterior summaries
# --------------------------------------------------------------------------

def _retained(records, burn_in) -> np.ndarray:
    chunks = [rec.retained_coeffs(burn_in) for rec in records]
    chunks = [c for c in chunks if c.shape[0] > 0]
    if not chunks:
        raise ValidationError("no retained samples after burn-in")
    return np.concatenate(chunks, axis=0)


def posterior_mean(records, priors, burn_in: int | None = None) -> SourceModel:
    """Average of retained samples across all chains, as a realized model.

    Realization is affine, so averaging whitened coordinates and realizing
    once equals averaging the realized functions.
    """
    coeffs = _retained(records, burn_in)
    return realize_state(priors, coeffs.mean(axis=0))


def posterior_mode(records, priors, burn_in: int | None = None) -> SourceModel:
    """Highest-scoring retained sample (per chain), averaged across chains.

    Samples are scored by log-likelihood plus the whitened log-prior
    -||s||^2 / 2, the log-posterior up to a constant.
    """
    modes = []
    for rec in records:
        cut = rec.burn_in if burn_in is None else int(burn_in)
        mask = rec.kept_steps >= cut
        if not np.any(mask):
            continue
        kept = rec.kept_coeffs[mask]
        scores = rec.log_likelihoods[rec.kept_steps[mask]] - 0.5 * np.sum(
            kept.reshape(kept.shape[0], -1) ** 2, axis=1
        )
        modes.append(kept[int(np.argmax(scores))])
    if not modes:
        raise ValidationError("no retained samples after burn-in")
    return realize_state(priors, np.mean(np.stack(modes), axis=0))


# --------------------------------------------------------------------------
# convergence diagnostics
# --------------------------------------------------------------------------

def effective_sample_size(series) -> float:
    """ESS = n / (1 + 2 sum of autocorrelations), clamped to [1, n].

    Autocorrelations are summed in consecutive pairs and truncated at the
    first nonpositive pair (initial-positive-sequence rule), computed from
    direct autocovariances.
    """
    x = as_float_array("series", series)
    n = x.size
    if n < 10:
        raise ValidationError("series must have at least 10 entries")
    center = float(x.mean())
    x = x - center
    c0 = float(x @ x) / n
    if not np.isfinite(c0) or c0 <= (1e-14 * (abs(center) + 1.0)) ** 2:
        return 1.0  # constant (or degenerate) series

    def rho(lag: int) -> float:
        return float(x[: n - lag] @ x[lag:]) / n / c0

    total = 0.0
    m = 0
    while 2 * m + 1 < n:
        pair = rho(2 * m) + rho(2 * m + 1)
        if pair <= 0.0:
            break
        total += pair
        m += 1
    iat = 2.0 * total - 1.0
    ess = n / iat if iat > 0 else float("inf")
    return float(min(max(ess, 1.0), n))


def min_probe_ess(record: ChainRecord, burn_in: int | None = None) -> float:
    """Smallest ESS over the record's scalar probe traces after burn-in."""
    cut = record.burn_in if burn_in is None else int(burn_in)
    traces = record.probe_values[cut:]
    if traces.shape[0] < 10:
        raise ValidationError("fewer than 10 post-burn-in samples")
    return min(effective_sample_size(traces[:, j]) for j in range(traces.shape[1]))


def potential_scale_reduction(traces) -> float:
    """Gelman-Rubin R-hat across chains for one scalar trace per chain."""
    arrays = [as_float_array("trace", t) for t in traces]
    if len(arrays) < 2:
        raise ValidationError("need at least two chains for R-hat")
    n = min(a.size for a in arrays)
    if n < 2:
        raise ValidationError("traces too short for R-hat")
    x = np.stack([a[:n] for a in arrays])
    within = float(np.mean(np.var(x, axis=1, ddof=1)))
    between = float(np.var(np.mean(x, axis=1), ddof=1))
    if within <= 0.0:
        return 1.0
    return float(np.sqrt((n - 1) / n + between / within))
