"""Input validation helpers shared by the library surface and the estimator."""

from __future__ import annotations

import numpy as np

from . import diff

__all__ = ["as_points", "as_array", "check_dims", "check_finite"]


def as_points(x, name: str = "points", min_points: int = 1) -> np.ndarray:
    """Coerce to a float64 ``(N, 3)`` array with at least ``min_points`` rows."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (N, 3), got {arr.shape}")
    if arr.shape[0] < min_points:
        raise ValueError(f"{name} needs at least {min_points} points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_array(x, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    return arr


def check_dims(x, ndim: int, name: str, last: int | None = None) -> None:
    """Shape check that also accepts Dual values (checked on the primal part)."""
    v = diff.value(x)
    if v.ndim != ndim or (last is not None and v.shape[-1] != last):
        expect = f"{ndim}-d" + (f" with trailing axis {last}" if last is not None else "")
        raise ValueError(f"{name} must be {expect}, got shape {v.shape}")


def check_finite(x, name: str) -> None:
    if not np.all(np.isfinite(diff.value(x))):
        raise ValueError(f"{name} contains non-finite values")
