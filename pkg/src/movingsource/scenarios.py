"""Benchmark scenarios: sensor layouts, target sources, and error metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .gp import GaussianProcessPrior, SquaredExponentialKernel, build_prior
from .sampled import SampledFunction
from .validation import as_float_array, check_nonnegative, check_positive
from .wavefield import (
    MeasurementSet,
    PhysicalConfig,
    PointSource,
    SensorArray,
    SourceModel,
    add_noise,
    forward_map,
    max_speed,
    warn_if_window_short,
)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

_REGION_POLES = {"hemisphere": (0.0, 0.0, 1.0), "quarter": (0.0, math.sqrt(0.5), math.sqrt(0.5))}


def sphere_sensors(count: int, radius: float, region: str = "hemisphere") -> SensorArray:
    """Deterministic, approximately uniform sensor layout on a sphere region.

    Points follow a Fibonacci lattice built directly on the region: heights
    are equally spaced (area-uniform on a sphere) and azimuths advance by
    the golden angle, wrapped into (0, pi) for the quarter-sphere so y > 0.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    radius = check_positive("radius", radius)
    if region not in _REGION_POLES:
        raise ValidationError(f"region must be one of {sorted(_REGION_POLES)}")
    if count == 1:
        unit = np.array([_REGION_POLES[region]])
    else:
        i = np.arange(count)
        z = 1.0 - (i + 0.5) / count  # in (0, 1): strictly above the equator
        rho = np.sqrt(1.0 - z * z)
        phi = (i + 0.5) * GOLDEN_ANGLE
        if region == "quarter":
            phi = np.mod(phi, math.pi)  # keep y = rho sin(phi) > 0
        unit = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    return SensorArray(radius * unit, radius=radius, region=region)


@dataclass(frozen=True)
class Scenario:
    """A benchmark problem: physics, truth, sensors, and sampler settings."""

    name: str
    cfg: PhysicalConfig
    truth: SourceModel | None
    sensors: SensorArray
    measurement_times: np.ndarray
    n_sources: int = 1
    trajectory_magnitude: float = 1.0
    trajectory_length_scale: float = 15.0
    intensity_magnitude: float = 1.0
    intensity_length_scale: float = 15.0
    precision: float = 100.0
    step: float = 0.0025
    noise_level: float = 0.0
    closed_curve: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "measurement_times", as_float_array("measurement_times", self.measurement_times)
        )
        check_positive("precision", self.precision)
        check_positive("step", self.step)
        check_nonnegative("noise_level", self.noise_level)
        if self.truth is not None:
            if self.truth.n_sources != self.n_sources:
                raise ValidationError("n_sources does not match the truth model")
            speed, subsonic = max_speed(self.truth, self.cfg)
            if not subsonic:
                raise ValidationError(f"truth reaches speed {speed:g} >= wave speed")


def latent_priors(
    turnoff_time: float,
    n_sources: int,
    trajectory_kernel: SquaredExponentialKernel,
    intensity_kernel: SquaredExponentialKernel,
    *,
    closed_curve: bool = False,
    grid_size: int = 100,
) -> list[GaussianProcessPrior]:
    """Zero-mean priors per latent function on a uniform emission grid.

    Trajectory coordinates clamp outside the grid; intensities drop to zero
    there (the source is off).  With ``closed_curve`` the trajectory priors
    are conditioned on equal endpoints.
    """
    if grid_size < 2:
        raise ValidationError("grid_size must be >= 2")
    grid = np.linspace(0.0, turnoff_time, grid_size)
    priors: list[GaussianProcessPrior] = []
    for _ in range(n_sources):
        for _axis in range(2):
            prior = build_prior(grid, trajectory_kernel, extrapolation="clamp")
            if closed_curve:
                prior = prior.condition_on_closed_curve()
            priors.append(prior)
        priors.append(build_prior(grid, intensity_kernel, extrapolation="zero"))
    return priors


def scenario_priors(scenario: Scenario, grid_size: int = 100) -> list[GaussianProcessPrior]:
    """Latent priors matching a scenario's hyperparameters."""
    return latent_priors(
        scenario.cfg.turnoff_time,
        scenario.n_sources,
        SquaredExponentialKernel(scenario.trajectory_magnitude, scenario.trajectory_length_scale),
        SquaredExponentialKernel(scenario.intensity_magnitude, scenario.intensity_length_scale),
        closed_curve=scenario.closed_curve,
        grid_size=grid_size,
    )


def synthesize_measurements(
    scenario: Scenario, seed: int | None = 0
) -> tuple[MeasurementSet, MeasurementSet | None]:
    """Clean and (when noise_level > 0) noisy data radiated by the truth.

    The noise stream is derived from the master seed with a fixed spawn key
    so it never collides with the chains' streams.
    """
    if scenario.truth is None:
        raise ValidationError("scenario has no truth model to simulate")
    warn_if_window_short(scenario.cfg, scenario.sensors, scenario.truth)
    field = forward_map(scenario.truth, scenario.sensors, scenario.measurement_times, scenario.cfg)
    clean = MeasurementSet(scenario.measurement_times, scenario.sensors, field, 0.0)
    if scenario.noise_level == 0.0:
        return clean, None
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    return clean, add_noise(clean, scenario.noise_level, rng)


# --------------------------------------------------------------------------
# built-in cases
# --------------------------------------------------------------------------

CASE_NAMES = {1: "line", 2: "arc", 3: "loop", 4: "two_sources"}
_CASE_IDS = {name: cid for cid, name in CASE_NAMES.items()}


def _polynomial_pulse(turnoff_time: float):
    """Quartic intensity rising from 0 and returning to (almost) 0 at turn-off."""

    def pulse(t):
        s = np.asarray(t, dtype=float) / turnoff_time
        return (((-28.44 * s + 56.89) * s - 39.11) * s + 10.67) * s

    return pulse


def _case_defaults(case_id: int) -> dict:
    base = {
        "wave_speed": 1.0,
        "final_time": 20.0,
        "turnoff_time": 15.0,
        "n_sensors": 424,
        "sensor_region": "hemisphere",
        "sensor_radius": 3.0,
        "n_times": 50,
        "trajectory_magnitude": 1.0,
        "intensity_magnitude": 1.0,
        "precision": 100.0,
        "step": 0.0025,
        "noise_level": 0.0,
        "closed_curve": False,
        "truth_grid_size": 400,
    }
    if case_id == 1:
        base.update(
            {"trajectory_length_scale": 15.0, "intensity_length_scale": 15.0, "velocity": (0.15, 0.0)}
        )
    elif case_id == 2:
        base.update({"trajectory_length_scale": 5.0, "intensity_length_scale": 5.0})
    elif case_id == 3:
        base.update(
            {
                "final_time": 40.0,
                "turnoff_time": 35.0,
                "trajectory_magnitude": 1.2,
                "intensity_magnitude": 1.2,
                "trajectory_length_scale": 4.0,
                "intensity_length_scale": 4.0,
                "step": 0.001,
            }
        )
    elif case_id == 4:
        base.update({"trajectory_length_scale": 5.0, "intensity_length_scale": 5.0})
    else:
        raise ValidationError(f"unknown case {case_id}")
    return base


def _case_truth(case_id: int, params: dict) -> list[tuple]:
    """Per-source (traj_x, traj_y, intensity) callables for a case."""
    t0 = params["turnoff_time"]
    if case_id == 1:
        vx, vy = (float(v) for v in params["velocity"])
        if math.hypot(vx, vy) >= params["wave_speed"]:
            raise ValidationError("line-case velocity must stay subsonic")
        return [
            (
                lambda t: vx * np.asarray(t, float),
                lambda t: vy * np.asarray(t, float),
                lambda t: np.ones_like(np.asarray(t, float)),
            )
        ]
    if case_id == 2:
        return [
            (
                lambda t: np.cos(0.3 * np.asarray(t, float)) - 1.0,
                lambda t: np.sin(0.3 * np.asarray(t, float)),
                _polynomial_pulse(t0),
            )
        ]
    if case_id == 3:
        def loop_x(t):
            t = np.asarray(t, float)
            return 1.6 * np.sin(2 * np.pi * t / t0 + 1.5 * np.pi) + (16.0 / 15.0) * np.cos(6 * np.pi * t / t0)

        def loop_y(t):
            t = np.asarray(t, float)
            return 1.6 * np.cos(2 * np.pi * t / t0 + 1.5 * np.pi) + (16.0 / 15.0) * np.sin(6 * np.pi * t / t0)

        return [(loop_x, loop_y, _polynomial_pulse(t0))]
    if case_id == 4:
        def cubic_x(t):
            s = np.asarray(t, float) / t0
            return ((16.0 * s - 24.0) * s + 5.0) * s

        def parabola_y(t):
            s = np.asarray(t, float) / t0
            return 3.0 * s * (1.0 - s)

        def circle_x(t):
            return 1.5 * np.cos(0.25 * np.asarray(t, float))

        def circle_y(t):
            return -1.5 * np.sin(0.25 * np.asarray(t, float))

        ones = lambda t: np.ones_like(np.asarray(t, float))
        return [(cubic_x, parabola_y, ones), (circle_x, circle_y, ones)]
    raise ValidationError(f"unknown case {case_id}")


def resolve_case(case) -> int:
    if isinstance(case, str):
        if case in _CASE_IDS:
            return _CASE_IDS[case]
        if case.isdigit() and int(case) in CASE_NAMES:
            return int(case)
        raise ValidationError(f"unknown case {case!r}; known: {sorted(_CASE_IDS)}")
    if case in CASE_NAMES:
        return int(case)
    raise ValidationError(f"unknown case {case!r}; known ids: {sorted(CASE_NAMES)}")


def build_case(case, **overrides) -> Scenario:
    """One of the built-in benchmark scenarios, with field-level overrides.

    Cases: 1 "line" (constant-speed straight line, constant unit intensity),
    2 "arc" (circular arc, polynomial pulse), 3 "loop" (closed multi-loop
    curve over a longer horizon, optionally conditioned on closedness),
    4 "two_sources" (cubic sweep plus clockwise circle, unit intensities).
    The line case's speed is fixed but its direction is a free choice; set
    ``velocity`` to change the default (0.15, 0).
    """
    case_id = resolve_case(case)
    params = _case_defaults(case_id)
    unknown = set(overrides) - set(params)
    if unknown:
        raise ValidationError(f"unknown overrides for case {case_id}: {sorted(unknown)}")
    params.update({k: v for k, v in overrides.items() if v is not None})

    cfg = PhysicalConfig(params["wave_speed"], params["final_time"], params["turnoff_time"])
    fine = np.linspace(0.0, cfg.turnoff_time, int(params["truth_grid_size"]))
    sources = []
    for fx, fy, fq in _case_truth(case_id, params):
        sources.append(
            PointSource(
                SampledFunction.from_function(fx, fine, "clamp"),
                SampledFunction.from_function(fy, fine, "clamp"),
                SampledFunction.from_function(fq, fine, "zero"),
            )
        )
    truth = SourceModel(tuple(sources))
    sensors = sphere_sensors(
        int(params["n_sensors"]), params["sensor_radius"], params["sensor_region"]
    )
    times = np.linspace(0.0, cfg.final_time, int(params["n_times"]))
    return Scenario(
        name=CASE_NAMES[case_id],
        cfg=cfg,
        truth=truth,
        sensors=sensors,
        measurement_times=times,
        n_sources=truth.n_sources,
        trajectory_magnitude=params["trajectory_magnitude"],
        trajectory_length_scale=params["trajectory_length_scale"],
        intensity_magnitude=params["intensity_magnitude"],
        intensity_length_scale=params["intensity_length_scale"],
        precision=params["precision"],
        step=params["step"],
        noise_level=params["noise_level"],
        closed_curve=bool(params["closed_curve"]),
    )


# --------------------------------------------------------------------------
# reconstruction error metrics
# --------------------------------------------------------------------------

def _metric_grid(estimate: SourceModel, grid) -> np.ndarray:
    if grid is None:
        return estimate.sources[0].emission_grid
    return as_float_array("grid", grid, min_len=1)


def _check_span(model: SourceModel, grid: np.ndarray, label: str) -> None:
    lo, hi = model.sources[0].traj_x.span
    if grid[0] < lo - 1e-9 or grid[-1] > hi + 1e-9:
        raise ValidationError(f"metric grid extends beyond the {label} model's emission span")


def trajectory_error(estimate: SourceModel, truth: SourceModel, grid=None) -> float:
    """RMS Euclidean trajectory mismatch over the grid (pooled over sources)."""
    if estimate.n_sources != truth.n_sources:
        raise ValidationError("estimate and truth must have the same number of sources")
    grid = _metric_grid(estimate, grid)
    _check_span(estimate, grid, "estimate")
    _check_span(truth, grid, "truth")
    sq = 0.0
    for est, tru in zip(estimate.sources, truth.sources):
        dx = est.traj_x(grid) - tru.traj_x(grid)
        dy = est.traj_y(grid) - tru.traj_y(grid)
        sq += float(np.mean(dx * dx + dy * dy))
    return math.sqrt(sq / estimate.n_sources)


def intensity_error(estimate: SourceModel, truth: SourceModel, grid=None) -> float:
    """RMS intensity mismatch over the grid (pooled over sources)."""
    if estimate.n_sources != truth.n_sources:
        raise ValidationError("estimate and truth must have the same number of sources")
    grid = _metric_grid(estimate, grid)
    _check_span(estimate, grid, "estimate")
    _check_span(truth, grid, "truth")
    sq = 0.0
    for est, tru in zip(estimate.sources, truth.sources):
        dq = est.intensity(grid) - tru.intensity(grid)
        sq += float(np.mean(dq * dq))
    return math.sqrt(sq / estimate.n_sources)


def wavefield_error(estimate: SourceModel, data: MeasurementSet, cfg: PhysicalConfig) -> float:
    """RMS residual between the data and the estimate's forward field."""
    predicted = forward_map(estimate, data.sensors, data.times, cfg)
    return float(np.sqrt(np.mean((data.field - predicted) ** 2)))
