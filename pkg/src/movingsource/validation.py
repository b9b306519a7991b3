"""Small argument-checking helpers used by the public constructors."""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError


def as_float_array(name: str, value, *, ndim: int = 1, min_len: int | None = None) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if min_len is not None and arr.shape[0] < min_len:
        raise ValidationError(f"{name} must have at least {min_len} entries, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite everywhere")
    return arr


def as_positions(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValidationError(f"{name} must be an (n, 3) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite everywhere")
    return arr


def check_positive(name: str, value) -> float:
    v = float(value)
    if not v > 0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")
    return v


def check_nonnegative(name: str, value) -> float:
    v = float(value)
    if not v >= 0:
        raise ValidationError(f"{name} must be >= 0, got {value!r}")
    return v
