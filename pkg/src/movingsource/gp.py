"""Gaussian-process priors on latent functions of emission time.

Priors are finite-dimensional: a mean vector and Gram matrix on a fixed
emission grid, factorized once so samples come from f = m + L s with
s ~ N(0, I).  Conditioning on point values or on a linear functional
(e.g. closed trajectories, f(end) = f(start)) produces new priors with the
standard rank-reduced mean and covariance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import (
    ConditioningError,
    DegenerateFunctionalError,
    KernelFactorizationError,
    ValidationError,
)
from .sampled import SampledFunction
from .validation import as_float_array, check_nonnegative, check_positive

# Jitter escalation for Cholesky of (numerically rank-deficient) SE Gram matrices.
JITTER_START_RTOL = 1e-10
JITTER_MAX_RTOL = 1e-6

# Relative eigenvalue cut-off for the exact factorization of conditioned
# covariances: modes this far below the top are treated as exactly null so
# realized samples honor conditioning constraints to round-off.
EIGEN_CLIP_RTOL = 1e-12


@dataclass(frozen=True)
class SquaredExponentialKernel:
    """k(t, t') = magnitude^2 exp(-(t - t')^2 / (2 length_scale^2))."""

    magnitude: float
    length_scale: float

    def __post_init__(self):
        check_positive("magnitude", self.magnitude)
        check_positive("length_scale", self.length_scale)

    def __call__(self, t, u):
        d = np.asarray(t, dtype=float) - np.asarray(u, dtype=float)
        return self.magnitude**2 * np.exp(-(d * d) / (2.0 * self.length_scale**2))


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _cholesky_with_jitter(gram: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    jitter = JITTER_START_RTOL * scale
    eye = np.eye(gram.shape[0])
    while jitter <= JITTER_MAX_RTOL * scale * (1.0 + 1e-12):
        try:
            return np.linalg.cholesky(gram + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise KernelFactorizationError(
        f"Cholesky failed up to jitter {JITTER_MAX_RTOL * scale:.3e}; kernel is ill-conditioned"
    )


def _null_preserving_factor(gram: np.ndarray, scale: float) -> np.ndarray:
    """Square root of a PSD matrix that keeps (near-)null directions exactly null.

    Used after conditioning: adding jitter would leak noise into constrained
    directions, so instead eigenvalues below a relative cut-off are zeroed.
    """
    eigvals, eigvecs = np.linalg.eigh(_symmetrize(gram))
    if eigvals.min() < -1e-8 * scale:
        raise KernelFactorizationError(
            f"covariance has eigenvalue {eigvals.min():.3e} < -1e-8 * scale; not PSD"
        )
    cut = EIGEN_CLIP_RTOL * max(float(eigvals.max()), 0.0)
    clipped = np.where(eigvals > cut, eigvals, 0.0)
    return eigvecs * np.sqrt(clipped)[None, :]


class GaussianProcessPrior:
    """Gaussian prior over function values on an emission grid.

    Unconditioned priors keep a lower-triangular Cholesky factor (with the
    smallest jitter that makes the Gram matrix factorizable).  Conditioned
    priors switch to a null-preserving square root so every realized sample
    satisfies the conditioning constraints to round-off.
    """

    def __init__(
        self,
        grid,
        mean,
        gram,
        *,
        kernel: SquaredExponentialKernel | None = None,
        extrapolation: str = "clamp",
        conditioned: bool = False,
        scale: float | None = None,
    ):
        self.grid = as_float_array("grid", grid, min_len=1)
        if self.grid.size > 1 and not np.all(np.diff(self.grid) > 0):
            raise ValidationError("grid must be strictly increasing")
        self.mean = as_float_array("mean", mean)
        gram = np.asarray(gram, dtype=float)
        if gram.shape != (self.grid.size, self.grid.size):
            raise ValidationError(f"gram must be ({self.grid.size}, {self.grid.size})")
        if self.mean.shape != self.grid.shape:
            raise ValidationError("mean and grid must have the same length")
        self.gram = _symmetrize(gram)
        self.kernel = kernel
        self.extrapolation = extrapolation
        self.conditioned = conditioned
        self.scale = float(scale) if scale is not None else max(float(np.max(np.diag(self.gram))), 1e-300)
        if conditioned:
            self.factor = _null_preserving_factor(self.gram, self.scale)
            self.jitter = 0.0
        else:
            self.factor, self.jitter = _cholesky_with_jitter(self.gram, self.scale)

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.gram).copy()

    def realize(self, coeffs) -> SampledFunction:
        """Map whitened coordinates to a function: f = mean + factor @ s."""
        coeffs = as_float_array("coeffs", coeffs)
        if coeffs.shape != (self.size,):
            raise ValidationError(f"coeffs must have length {self.size}")
        return SampledFunction(self.grid, self.mean + self.factor @ coeffs, self.extrapolation)

    def realize_values(self, coeffs: np.ndarray) -> np.ndarray:
        return self.mean + self.factor @ coeffs

    def sample(self, rng: np.random.Generator) -> SampledFunction:
        return self.realize(rng.standard_normal(self.size))

    def condition_on_points(self, points, values, noise: float = 0.0) -> "GaussianProcessPrior":
        """Condition on observed values f(points) = values (+ optional noise).

        Points must lie on the grid, except for unconditioned kernel-backed
        priors where the cross-covariance can still be evaluated analytically.
        """
        points = np.atleast_1d(np.asarray(points, dtype=float))
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if points.shape != values.shape:
            raise ValidationError("points and values must have the same length")
        check_nonnegative("noise", noise)

        span = max(self.grid[-1] - self.grid[0], 1.0)
        idx = np.searchsorted(self.grid, points)
        idx = np.clip(idx, 0, self.size - 1)
        left = np.clip(idx - 1, 0, self.size - 1)
        nearest = np.where(
            np.abs(self.grid[left] - points) < np.abs(self.grid[idx] - points), left, idx
        )
        on_grid = np.abs(self.grid[nearest] - points) <= 1e-9 * span

        if np.all(on_grid):
            cross = self.gram[:, nearest]
            cov_pp = self.gram[np.ix_(nearest, nearest)]
            mean_p = self.mean[nearest]
        elif self.kernel is not None and not self.conditioned:
            cross = self.kernel(self.grid[:, None], points[None, :])
            cov_pp = self.kernel(points[:, None], points[None, :])
            mean_p = np.interp(points, self.grid, self.mean)
        else:
            raise ConditioningError(
                "conditioning points must lie on the grid once the prior no longer "
                "carries a kernel; add the points to the emission grid instead"
            )

        system = cov_pp + noise**2 * np.eye(points.size)
        try:
            np.linalg.cholesky(system)  # reject (near-)singular systems early
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(
                "conditioning covariance is singular; supply noise > 0"
            ) from exc
        rhs = np.concatenate([(values - mean_p)[:, None], cross.T], axis=1)
        solved = np.linalg.solve(system, rhs)
        new_mean = self.mean + cross @ solved[:, 0]
        new_gram = self.gram - cross @ solved[:, 1:]
        return GaussianProcessPrior(
            self.grid,
            new_mean,
            new_gram,
            kernel=None,
            extrapolation=self.extrapolation,
            conditioned=True,
            scale=self.scale,
        )

    def condition_on_functional(
        self,
        cov_action,
        cov_quad: float,
        mean_action: float,
        target: float,
    ) -> "GaussianProcessPrior":
        """Condition on a linear functional constraint L[f] = target.

        ``cov_action`` gives L applied to one kernel argument: either a
        callable t -> L[k(., t)] or its values on the grid; ``cov_quad`` is L
        applied to both arguments and ``mean_action`` is L applied to the
        mean.  The conditioned prior has

            mean'(t)  = mean(t) + cov_action(t) (target - mean_action) / cov_quad
            gram'(t, t') = gram(t, t') - cov_action(t) cov_action(t') / cov_quad
        """
        action = np.asarray(cov_action(self.grid) if callable(cov_action) else cov_action, dtype=float)
        if action.shape != self.grid.shape:
            raise ValidationError("cov_action must evaluate to one value per grid point")
        quad = float(cov_quad)
        if quad <= 1e-12 * self.scale:
            raise DegenerateFunctionalError(
                f"functional variance {quad:.3e} is not positive enough to condition on"
            )
        new_mean = self.mean + action * ((float(target) - float(mean_action)) / quad)
        new_gram = self.gram - np.outer(action, action) / quad
        return GaussianProcessPrior(
            self.grid,
            new_mean,
            new_gram,
            kernel=None,
            extrapolation=self.extrapolation,
            conditioned=True,
            scale=self.scale,
        )

    def condition_on_closed_curve(self, target: float = 0.0) -> "GaussianProcessPrior":
        """Built-in endpoint functional: condition on f(grid end) - f(grid start) = target."""
        action = self.gram[:, -1] - self.gram[:, 0]
        quad = self.gram[-1, -1] - 2.0 * self.gram[0, -1] + self.gram[0, 0]
        mean_action = self.mean[-1] - self.mean[0]
        return self.condition_on_functional(action, quad, mean_action, target)


def build_prior(
    grid,
    kernel: SquaredExponentialKernel,
    mean_fn: Callable | None = None,
    *,
    extrapolation: str = "clamp",
) -> GaussianProcessPrior:
    """Assemble Gram matrix and Cholesky factor of a kernel prior on a grid."""
    grid = as_float_array("grid", grid, min_len=1)
    mean = np.zeros(grid.size) if mean_fn is None else np.broadcast_to(
        np.asarray(mean_fn(grid), dtype=float), grid.shape
    ).copy()
    gram = kernel(grid[:, None], grid[None, :])
    return GaussianProcessPrior(
        grid,
        mean,
        gram,
        kernel=kernel,
        extrapolation=extrapolation,
        scale=kernel.magnitude**2,
    )
