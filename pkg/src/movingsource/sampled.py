"""Piecewise-linear functions of time sampled on a fixed grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ValidationError
from .validation import as_float_array

EXTRAPOLATION_MODES = ("clamp", "zero")


@dataclass(frozen=True)
class SampledFunction:
    """Scalar function of time stored as values on a strictly increasing grid.

    Between grid points the function is linear.  Outside the grid span it
    either clamps to its end values (trajectory coordinates keep their last
    position) or drops to zero (intensities vanish once the source is off).
    """

    grid: np.ndarray
    values: np.ndarray
    extrapolation: str = "clamp"
    _slopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = as_float_array("grid", self.grid, min_len=2)
        values = as_float_array("values", self.values, min_len=2)
        if grid.shape != values.shape:
            raise ValidationError(
                f"grid and values must have the same length, got {grid.shape} vs {values.shape}"
            )
        if not np.all(np.diff(grid) > 0):
            raise ValidationError("grid must be strictly increasing")
        if self.extrapolation not in EXTRAPOLATION_MODES:
            raise ValidationError(f"extrapolation must be one of {EXTRAPOLATION_MODES}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_slopes", np.diff(values) / np.diff(grid))

    @classmethod
    def from_function(cls, fn: Callable, grid, extrapolation: str = "clamp") -> "SampledFunction":
        grid = as_float_array("grid", grid, min_len=2)
        return cls(grid, np.asarray(fn(grid), dtype=float), extrapolation)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.interp(t_arr, self.grid, self.values)
        if self.extrapolation == "zero":
            out = np.where((t_arr < self.grid[0]) | (t_arr > self.grid[-1]), 0.0, out)
        return float(out) if out.ndim == 0 else out

    def derivative(self, t):
        """Slope of the segment containing t (right-sided at interior nodes)."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.grid, t_arr, side="right") - 1, 0, len(self._slopes) - 1)
        out = np.where((t_arr < self.grid[0]) | (t_arr > self.grid[-1]), 0.0, self._slopes[idx])
        return float(out) if out.ndim == 0 else out

    @property
    def segment_slopes(self) -> np.ndarray:
        """Constant slope of each of the len(grid) - 1 segments."""
        return self._slopes

    def node_derivatives(self) -> np.ndarray:
        """Segment slopes at every grid node, matching :meth:`derivative`."""
        d = np.empty_like(self.grid)
        d[:-1] = self._slopes
        d[-1] = self._slopes[-1]
        return d

    def with_values(self, values) -> "SampledFunction":
        return SampledFunction(self.grid, values, self.extrapolation)
