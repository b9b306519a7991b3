"""Simulation and Bayesian reconstruction of moving acoustic point sources."""

from .estimator import PCNReconstructor
from .exceptions import (
    ConditioningError,
    DegenerateFunctionalError,
    KernelFactorizationError,
    MovingSourceError,
    NearFieldError,
    RetardedTimeError,
    SupersonicTrajectoryError,
    ValidationError,
)
from .gp import GaussianProcessPrior, SquaredExponentialKernel, build_prior
from .inference import (
    ChainRecord,
    GaussianLikelihood,
    LatentState,
    continue_chain,
    effective_sample_size,
    log_likelihood,
    min_probe_ess,
    pcn_step,
    posterior_mean,
    posterior_mode,
    potential_scale_reduction,
    realize_state,
    run_chain,
)
from .sampled import SampledFunction
from .scenarios import (
    Scenario,
    build_case,
    intensity_error,
    latent_priors,
    scenario_priors,
    sphere_sensors,
    synthesize_measurements,
    trajectory_error,
    wavefield_error,
)
from .wavefield import (
    MeasurementSet,
    ObservationWindowWarning,
    PhysicalConfig,
    PointSource,
    SensorArray,
    SourceModel,
    add_noise,
    evaluate_field,
    forward_map,
    max_speed,
    retarded_time,
    warn_if_window_short,
)

__version__ = "0.1.0"

__all__ = [
    "ChainRecord",
    "ConditioningError",
    "DegenerateFunctionalError",
    "GaussianLikelihood",
    "GaussianProcessPrior",
    "KernelFactorizationError",
    "LatentState",
    "MeasurementSet",
    "MovingSourceError",
    "NearFieldError",
    "ObservationWindowWarning",
    "PCNReconstructor",
    "PhysicalConfig",
    "PointSource",
    "RetardedTimeError",
    "SampledFunction",
    "Scenario",
    "SensorArray",
    "SourceModel",
    "SquaredExponentialKernel",
    "SupersonicTrajectoryError",
    "ValidationError",
    "add_noise",
    "build_case",
    "build_prior",
    "continue_chain",
    "effective_sample_size",
    "evaluate_field",
    "forward_map",
    "intensity_error",
    "latent_priors",
    "log_likelihood",
    "max_speed",
    "min_probe_ess",
    "pcn_step",
    "posterior_mean",
    "posterior_mode",
    "potential_scale_reduction",
    "realize_state",
    "retarded_time",
    "run_chain",
    "scenario_priors",
    "sphere_sensors",
    "synthesize_measurements",
    "trajectory_error",
    "wavefield_error",
    "warn_if_window_short",
]
