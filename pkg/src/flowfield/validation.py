"""Input validation helpers shared by the core modules and the estimators."""

from __future__ import annotations

import numpy as np

__all__ = [
    "ValidationError",
    "NumericError",
    "ORTHO_TOL",
    "as_float_array",
    "as_index_array",
    "check_finite",
    "check_length",
    "check_rotation",
]

# Tolerance for orthonormality / unit-length style invariants.
ORTHO_TOL = 1e-9


class ValidationError(ValueError):
    """An input violates a documented structural invariant (shape, schema, range)."""


class NumericError(ValueError):
    """A value is non-finite or numerically outside its valid domain."""


def as_float_array(x, name: str, shape: tuple | None = None) -> np.ndarray:
    """Coerce to a float64 array, optionally enforcing a shape.

    ``shape`` entries of -1 match any extent.
    """
    try:
        arr = np.asarray(x, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: not convertible to a float array ({exc})") from None
    if shape is not None:
        if arr.ndim != len(shape) or any(
            s != -1 and s != d for s, d in zip(shape, arr.shape)
        ):
            want = "x".join("*" if s == -1 else str(s) for s in shape)
            raise ValidationError(f"{name}: expected shape {want}, got {arr.shape}")
    return arr


def as_index_array(x, name: str, shape: tuple | None = None) -> np.ndarray:
    """Coerce to an int32 index array, optionally enforcing a shape."""
    arr = np.asarray(x)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValidationError(f"{name}: expected integer indices, got dtype {arr.dtype}")
    arr = arr.astype(np.int32, copy=False)
    if shape is not None:
        if arr.ndim != len(shape) or any(
            s != -1 and s != d for s, d in zip(shape, arr.shape)
        ):
            want = "x".join("*" if s == -1 else str(s) for s in shape)
            raise ValidationError(f"{name}: expected shape {want}, got {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name}: contains non-finite values")
    return arr


def check_length(arr: np.ndarray, n: int, name: str) -> np.ndarray:
    if arr.shape != (n,):
        raise ValidationError(f"{name}: expected length {n}, got shape {arr.shape}")
    return arr


def check_rotation(r, name: str, tol: float = ORTHO_TOL) -> np.ndarray:
    """Validate a 3x3 proper rotation (orthonormal, det +1)."""
    r = as_float_array(r, name, (3, 3))
    check_finite(r, name)
    if not np.allclose(r @ r.T, np.eye(3), atol=tol, rtol=0.0):
        raise ValidationError(f"{name}: rotation must be orthonormal within {tol}")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValidationError(f"{name}: rotation must have determinant +1 within {tol}")
    return r
