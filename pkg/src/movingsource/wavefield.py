"""Closed-form wave field of subsonic moving point sources.

The field radiated by a moving monopole is evaluated through its retarded
potential: the signal observed at position x and time t left the source at
the unique earlier emission time tau solving c (t - tau) = |x - p(tau)|, and

    u(t, x) = (c / 4 pi) q(tau) / (|x - p(tau)| h(x, tau)),

with Doppler factor h = c - (x - p(tau)) . p'(tau) / |x - p(tau)|.  The
emission time is unique, and h > 0, whenever the source speed stays below
the wave speed.  All trajectories live in the z = 0 plane and are stored as
piecewise-linear :class:`~movingsource.sampled.SampledFunction` objects.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    NearFieldError,
    RetardedTimeError,
    SupersonicTrajectoryError,
    ValidationError,
)
from .sampled import SampledFunction
from .validation import as_float_array, as_positions, check_nonnegative, check_positive

FOUR_PI = 4.0 * math.pi

# Relative distance below which the 1/|x - p| field is treated as singular.
NEAR_FIELD_RTOL = 1e-6


class ObservationWindowWarning(UserWarning):
    """Measurement horizon may cut off signal emitted near the turn-off time."""


@dataclass(frozen=True)
class PhysicalConfig:
    """Wave speed and timing of one experiment.

    The source radiates during [0, turnoff_time]; measurements run until
    final_time.
    """

    wave_speed: float = 1.0
    final_time: float = 20.0
    turnoff_time: float = 15.0

    def __post_init__(self):
        check_positive("wave_speed", self.wave_speed)
        check_positive("turnoff_time", self.turnoff_time)
        if not self.turnoff_time < self.final_time:
            raise ValidationError(
                f"turnoff_time must be < final_time, got {self.turnoff_time} >= {self.final_time}"
            )


@dataclass(frozen=True)
class PointSource:
    """One moving monopole: planar trajectory plus emission intensity.

    The three latent functions share a single emission grid so the forward
    map can sweep it once per source.
    """

    traj_x: SampledFunction
    traj_y: SampledFunction
    intensity: SampledFunction

    def __post_init__(self):
        if not (
            np.array_equal(self.traj_x.grid, self.traj_y.grid)
            and np.array_equal(self.traj_x.grid, self.intensity.grid)
        ):
            raise ValidationError("trajectory and intensity must share one emission grid")

    @property
    def emission_grid(self) -> np.ndarray:
        return self.traj_x.grid

    def position(self, t):
        """Trajectory point(s) (x, y, 0) at time t."""
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros(t_arr.shape + (3,))
        out[..., 0] = self.traj_x(t_arr)
        out[..., 1] = self.traj_y(t_arr)
        return out


@dataclass(frozen=True)
class SourceModel:
    """One or more simultaneously radiating point sources."""

    sources: tuple[PointSource, ...]

    def __post_init__(self):
        if len(self.sources) < 1:
            raise ValidationError("SourceModel needs at least one source")
        object.__setattr__(self, "sources", tuple(self.sources))

    @classmethod
    def single(cls, traj_x, traj_y, intensity) -> "SourceModel":
        return cls((PointSource(traj_x, traj_y, intensity),))

    @property
    def n_sources(self) -> int:
        return len(self.sources)


REGION_AREAS = {"hemisphere": lambda r: 2.0 * math.pi * r**2, "quarter": lambda r: math.pi * r**2}


@dataclass(frozen=True)
class SensorArray:
    """Fixed measurement points, typically on a sphere of radius R."""

    positions: np.ndarray
    radius: float
    region: str = "custom"
    custom_area: float | None = None

    def __post_init__(self):
        positions = as_positions("positions", self.positions)
        radius = check_positive("radius", self.radius)
        object.__setattr__(self, "positions", positions)
        if self.region in REGION_AREAS:
            norms = np.linalg.norm(positions, axis=1)
            if not np.allclose(norms, radius, rtol=1e-12, atol=0.0):
                raise ValidationError(f"all sensors of a {self.region} array must sit at radius R")

    @property
    def n_sensors(self) -> int:
        return self.positions.shape[0]

    @property
    def area(self) -> float:
        """Analytic area of the measurement region (used by the noise model)."""
        if self.region in REGION_AREAS:
            return REGION_AREAS[self.region](self.radius)
        if self.custom_area is not None:
            return float(self.custom_area)
        raise ValidationError("custom sensor arrays need custom_area for the noise model")


@dataclass(frozen=True)
class MeasurementSet:
    """Field samples on a (sensors x times) grid, clean or noisy."""

    times: np.ndarray
    sensors: SensorArray
    field: np.ndarray
    noise_level: float = 0.0

    def __post_init__(self):
        times = as_float_array("times", self.times, min_len=1)
        field = np.asarray(self.field, dtype=float)
        if field.shape != (self.sensors.n_sensors, times.shape[0]):
            raise ValidationError(
                f"field must be (n_sensors, n_times) = "
                f"({self.sensors.n_sensors}, {times.shape[0]}), got {field.shape}"
            )
        if not np.all(np.isfinite(field)):
            raise ValidationError("field must be finite everywhere")
        check_nonnegative("noise_level", self.noise_level)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "field", field)


def _near_field_threshold(sensor_norm: float) -> float:
    return NEAR_FIELD_RTOL * max(1.0, sensor_norm)


def retarded_time(sensor, t, source: PointSource, cfg: PhysicalConfig, *, tol=None, max_iter=200):
    """Emission time tau with c (t - tau) = |x - p(tau)|, for scalar or array t.

    Solved by the fixed-point iteration tau <- t - |x - p(tau)| / c starting
    from tau = t; the subsonic condition makes the map a contraction.  A
    negative result means the wavefront from the first emission has not yet
    reached the sensor.
    """
    c = cfg.wave_speed
    if tol is None:
        tol = 1e-12 * max(1.0, cfg.final_time)
    x, y, z = (float(v) for v in np.asarray(sensor, dtype=float))
    t_arr = np.asarray(t, dtype=float)
    tau = t_arr.astype(float).copy()
    last_shift = np.inf
    for _ in range(max_iter):
        rx = x - source.traj_x(tau)
        ry = y - source.traj_y(tau)
        r = np.sqrt(rx * rx + ry * ry + z * z)
        tau_next = t_arr - r / c
        last_shift = float(np.max(np.abs(tau_next - tau)))
        tau = tau_next
        if last_shift <= tol:
            return float(tau) if tau.ndim == 0 else tau
    raise RetardedTimeError(
        f"retarded-time iteration did not converge within {max_iter} steps "
        f"(last update {last_shift:.3e}); is the source subsonic?",
        residual=last_shift * c,
    )


def evaluate_field(source_model: SourceModel, sensor, t, cfg: PhysicalConfig):
    """Exact field of the model at one sensor, for scalar or array times.

    Each source contributes zero before its first wavefront arrives
    (|x - p(0)| >= c t) and automatically after turn-off, because the
    intensity extrapolates to zero beyond the emission grid.
    """
    sensor = np.asarray(sensor, dtype=float)
    x, y, z = (float(v) for v in sensor)
    threshold = _near_field_threshold(float(np.linalg.norm(sensor)))
    c = cfg.wave_speed
    scalar = np.ndim(t) == 0
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    total = np.zeros(t_arr.shape)
    for source in source_model.sources:
        start = source.position(0.0)
        r0 = math.hypot(x - start[0], y - start[1], z)
        active = r0 < c * t_arr
        if not np.any(active):
            continue
        tau = np.atleast_1d(retarded_time(sensor, t_arr[active], source, cfg))
        rx = x - source.traj_x(tau)
        ry = y - source.traj_y(tau)
        r = np.sqrt(rx * rx + ry * ry + z * z)
        if np.any(r < threshold):
            raise NearFieldError(
                f"sensor within {threshold:.3e} of the trajectory; field is singular there"
            )
        h = c - (rx * source.traj_x.derivative(tau) + ry * source.traj_y.derivative(tau)) / r
        if np.any(h <= 0):
            raise SupersonicTrajectoryError("Doppler factor h <= 0: source not subsonic")
        total[active] += (c / FOUR_PI) * source.intensity(tau) / (r * h)
    return float(total[0]) if scalar else total


def forward_map(source_model: SourceModel, sensors, measurement_times, cfg: PhysicalConfig):
    """Field matrix (n_sensors, n_times) for a whole sensor array.

    Instead of solving for the emission time at every measurement instant,
    each source's emission grid is mapped to per-sensor observation times
    t = tau + |x - p(tau)| / c, the field is evaluated there in closed form,
    and the result is linearly interpolated onto the measurement times.
    Outside the observed window (before first arrival, after the turn-off
    emission arrives) the field is zero.
    """
    positions = sensors.positions if isinstance(sensors, SensorArray) else as_positions("sensors", sensors)
    times = as_float_array("measurement_times", measurement_times, min_len=1)
    out = np.zeros((positions.shape[0], times.shape[0]))
    if _forward_fill is not None:
        positions = np.ascontiguousarray(positions)
        times = np.ascontiguousarray(times)
        thresholds = NEAR_FIELD_RTOL * np.maximum(1.0, np.linalg.norm(positions, axis=1))
        for source in source_model.sources:
            status = _forward_fill(
                out,
                positions,
                thresholds,
                times,
                source.emission_grid,
                source.traj_x.values,
                source.traj_y.values,
                source.traj_x.segment_slopes,
                source.traj_y.segment_slopes,
                source.intensity.values,
                cfg.wave_speed,
            )
            if status == 1:
                raise NearFieldError("a sensor lies (nearly) on the source trajectory")
            if status == 2:
                raise SupersonicTrajectoryError(
                    "observation times not strictly increasing or h <= 0: source not subsonic"
                )
        return out
    for source in source_model.sources:
        out += _single_source_forward(source, positions, times, cfg)
    return out


def _forward_fill_impl(out, positions, thresholds, times, tau, px, py, vx, vy, q, c):
    """Accumulate one source's field into ``out``; see _single_source_forward.

    Returns 0 on success, 1 on a near-field hit, 2 on a subsonic-contract
    violation.  Plain-Python reference semantics; compiled with numba when
    available.
    """
    n_s = positions.shape[0]
    n_t = times.shape[0]
    m = tau.shape[0]
    coef = c / FOUR_PI
    obs = np.empty(m)
    rbuf = np.empty(m)
    dxbuf = np.empty(m)
    dybuf = np.empty(m)
    u_left = np.empty(m - 1)
    u_right = np.empty(m - 1)
    for i in range(n_s):
        sx = positions[i, 0]
        sy = positions[i, 1]
        z2 = positions[i, 2] * positions[i, 2]
        for j in range(m):
            dx = sx - px[j]
            dy = sy - py[j]
            rj = math.sqrt(dx * dx + dy * dy + z2)
            if rj < thresholds[i]:
                return 1
            dxbuf[j] = dx
            dybuf[j] = dy
            rbuf[j] = rj
            obs[j] = tau[j] + rj / c
        for j in range(m - 1):
            if obs[j + 1] <= obs[j]:
                return 2
            h_l = c - (dxbuf[j] * vx[j] + dybuf[j] * vy[j]) / rbuf[j]
            h_r = c - (dxbuf[j + 1] * vx[j] + dybuf[j + 1] * vy[j]) / rbuf[j + 1]
            if h_l <= 0.0 or h_r <= 0.0:
                return 2
            u_left[j] = coef * q[j] / (rbuf[j] * h_l)
            u_right[j] = coef * q[j + 1] / (rbuf[j + 1] * h_r)
        t_first = obs[0]
        t_last = obs[m - 1]
        for k in range(n_t):
            t = times[k]
            if t < t_first or t > t_last:
                continue
            lo = 0
            hi = m - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if obs[mid] <= t:
                    lo = mid
                else:
                    hi = mid
            w = (t - obs[lo]) / (obs[lo + 1] - obs[lo])
            out[i, k] += (1.0 - w) * u_left[lo] + w * u_right[lo]
    return 0


try:
    import numba

    _forward_fill = numba.njit(cache=True)(_forward_fill_impl)
except ImportError:  # pragma: no cover - exercised only without numba
    _forward_fill = None


def _single_source_forward(source: PointSource, positions, times, cfg: PhysicalConfig):
    # The trajectory's velocity is constant on each grid segment, so the
    # field is evaluated per segment (both endpoint values use that
    # segment's velocity) and interpolated within it.  This matches
    # pointwise evaluation through retarded_time up to the interpolation
    # error, which is second order in the grid spacing.
    c = cfg.wave_speed
    tau = source.emission_grid
    px = source.traj_x.values
    py = source.traj_y.values
    vx = source.traj_x.segment_slopes
    vy = source.traj_y.segment_slopes
    q = source.intensity.values

    dx = positions[:, 0, None] - px[None, :]
    dy = positions[:, 1, None] - py[None, :]
    z2 = positions[:, 2] ** 2
    r = np.sqrt(dx * dx + dy * dy + z2[:, None])

    sensor_norms = np.linalg.norm(positions, axis=1)
    if np.any(r < NEAR_FIELD_RTOL * np.maximum(1.0, sensor_norms)[:, None]):
        raise NearFieldError("a sensor lies (nearly) on the source trajectory")

    observation_times = tau[None, :] + r / c
    if np.any(np.diff(observation_times, axis=1) <= 0):
        raise SupersonicTrajectoryError(
            "observation times not strictly increasing: source not subsonic"
        )

    h_left = c - (dx[:, :-1] * vx[None, :] + dy[:, :-1] * vy[None, :]) / r[:, :-1]
    h_right = c - (dx[:, 1:] * vx[None, :] + dy[:, 1:] * vy[None, :]) / r[:, 1:]
    if np.any(h_left <= 0) or np.any(h_right <= 0):
        raise SupersonicTrajectoryError("Doppler factor h <= 0: source not subsonic")

    coef = c / FOUR_PI
    u_left = coef * q[None, :-1] / (r[:, :-1] * h_left)
    u_right = coef * q[None, 1:] / (r[:, 1:] * h_right)

    # One searchsorted call covers all sensors: each sensor's observation
    # times are shifted into a disjoint block, and queries are shifted the
    # same way, so a flat binary search lands in the right row.
    n_s, m = observation_times.shape
    n_t = times.size
    lo = min(float(times.min()), float(observation_times[:, 0].min()))
    hi = max(float(times.max()), float(observation_times[:, -1].max()))
    span = hi - lo + 1.0
    offsets = span * np.arange(n_s)
    flat_obs = (observation_times + offsets[:, None]).ravel()
    queries = np.tile(times, n_s)
    pos = np.searchsorted(flat_obs, queries + np.repeat(offsets, n_t), side="right") - 1
    rows = np.repeat(np.arange(n_s), n_t)
    seg = np.clip(pos - rows * m, 0, m - 2)

    obs_flat = observation_times.ravel()
    left = rows * m + seg
    t_left = obs_flat[left]
    weight = (queries - t_left) / (obs_flat[left + 1] - t_left)
    flat_seg = rows * (m - 1) + seg
    values = (1.0 - weight) * u_left.ravel()[flat_seg] + weight * u_right.ravel()[flat_seg]
    inside = (queries >= obs_flat[rows * m]) & (queries <= obs_flat[rows * m + m - 1])
    return np.where(inside, values, 0.0).reshape(n_s, n_t)


def max_speed(source_model: SourceModel, cfg: PhysicalConfig) -> tuple[float, bool]:
    """Largest finite-difference source speed on the grid, and the subsonic flag."""
    fastest = 0.0
    for source in source_model.sources:
        dt = np.diff(source.emission_grid)
        dx = np.diff(source.traj_x.values) / dt
        dy = np.diff(source.traj_y.values) / dt
        fastest = max(fastest, float(np.max(np.hypot(dx, dy))))
    return fastest, fastest < cfg.wave_speed


def add_noise(measurements: MeasurementSet, noise_level: float, rng) -> MeasurementSet:
    """Add time-dependent Gaussian noise shared across all sensors.

    At each measurement time the noise standard deviation is the given
    fraction of the field's root-mean-square over the measurement surface,

        sigma_l = noise_level * sqrt((1 / A) integral_Gamma u(x, t_l)^2 dS)
                ~ noise_level * sqrt(mean_i u(x_i, t_l)^2),

    the area-normalized surface quadrature (the area cancels for uniform
    sensor layouts).  One draw per time is added to every sensor, which is
    harder on the inversion than independent per-sensor noise.
    """
    alpha = check_nonnegative("noise_level", noise_level)
    if alpha == 0.0:
        return measurements
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    sigma = alpha * np.sqrt(np.mean(measurements.field**2, axis=0))
    noisy = measurements.field + sigma[None, :] * rng.standard_normal(len(sigma))[None, :]
    return MeasurementSet(measurements.times, measurements.sensors, noisy, noise_level=alpha)


def warn_if_window_short(cfg: PhysicalConfig, sensors: SensorArray, source_model: SourceModel):
    """Warn when final_time may truncate signal emitted just before turn-off.

    Information emitted at the turn-off time reaches the farthest sensor at
    turnoff_time + max |x - p| / wave_speed; a shorter measurement horizon
    loses part of it.  Advisory only: the checked bound depends on the
    trajectory, and mild violations merely degrade late-time data.
    """
    max_range = 0.0
    for source in source_model.sources:
        dx = sensors.positions[:, 0, None] - source.traj_x.values[None, :]
        dy = sensors.positions[:, 1, None] - source.traj_y.values[None, :]
        r = np.sqrt(dx**2 + dy**2 + sensors.positions[:, 2, None] ** 2)
        max_range = max(max_range, float(r.max()))
    horizon = cfg.turnoff_time + max_range / cfg.wave_speed
    if cfg.final_time <= horizon:
        warnings.warn(
            f"final_time {cfg.final_time:g} <= turn-off arrival bound {horizon:g}; "
            "late emissions will be partially unobserved",
            ObservationWindowWarning,
            stacklevel=2,
        )
