"""Exception types shared across the package."""


class MovingSourceError(Exception):
    """Base class for all package-specific failures."""


class ValidationError(MovingSourceError, ValueError):
    """Invalid argument, configuration, or artifact."""


class RetardedTimeError(MovingSourceError):
    """Fixed-point solve for the emission time failed to converge."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class NearFieldError(MovingSourceError):
    """Sensor too close to a source trajectory for the closed-form field."""


class SupersonicTrajectoryError(MovingSourceError):
    """Trajectory violates the subsonic contract of the forward map."""


class KernelFactorizationError(MovingSourceError):
    """Covariance matrix could not be factorized even after jitter escalation."""


class ConditioningError(MovingSourceError):
    """Conditioning system is singular or the conditioning points are unusable."""


class DegenerateFunctionalError(MovingSourceError):
    """Linear functional has (numerically) zero variance under the prior."""
