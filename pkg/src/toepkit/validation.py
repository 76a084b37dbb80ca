"""Input validation helpers shared by the operators and estimators."""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_sequence",
    "check_sequence_matrix",
    "check_finite",
    "OracleSizeError",
]


class OracleSizeError(ValueError):
    """Raised when a dense oracle is asked for more than its memory guard allows."""


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_sequence(x, n=None, name="x"):
    """Coerce to a finite 1-D float64 vector, optionally of fixed length."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {n}")
    return check_finite(x, name)


def check_sequence_matrix(X, name="X"):
    """Coerce to a finite 2-D float64 array of shape (n, d)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D (sequence length x channels), got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    return check_finite(X, name)
