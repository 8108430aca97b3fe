"""Light input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np

__all__ = [
    "check_int",
    "check_float",
    "check_fraction",
    "check_vector",
    "check_matrix",
    "check_indices",
]


def check_int(value, name, minimum=None, maximum=None):
    """Validate an integer parameter and return it as a builtin int."""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_float(value, name, minimum=None, maximum=None, allow_min=True):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if minimum is not None:
        if value < minimum or (not allow_min and value == minimum):
            bound = ">=" if allow_min else ">"
            raise ValueError(f"{name} must be {bound} {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ValueError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_fraction(value, name, allow_zero=False, allow_one=True):
    """Validate a fraction in (0, 1] by default."""
    value = check_float(value, name)
    lo_ok = value > 0 or (allow_zero and value == 0)
    hi_ok = value < 1 or (allow_one and value == 1)
    if not (lo_ok and hi_ok):
        raise ValueError(f"{name} must lie in the unit interval, got {value}")
    return value


def check_vector(x, name, min_len=0, finite=True):
    """Coerce to a 1-d float array; reject higher ranks and non-finite entries."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.shape[0] < min_len:
        raise ValueError(f"{name} needs at least {min_len} entries, got {x.shape[0]}")
    if finite and x.size and not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_matrix(X, name, min_rows=1, min_cols=1, finite=True):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {X.shape}")
    if X.shape[0] < min_rows or X.shape[1] < min_cols:
        raise ValueError(
            f"{name} must be at least {min_rows}x{min_cols}, got {X.shape[0]}x{X.shape[1]}"
        )
    if finite and not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_indices(idx, n, name, allow_empty=False):
    """Validate a set of integer indices into range(n); returns a sorted int array."""
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if idx.size == 0 and not allow_empty:
        raise ValueError(f"{name} must not be empty")
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"{name} has entries outside [0, {n})")
    if np.unique(idx).size != idx.size:
        raise ValueError(f"{name} contains duplicate indices")
    return np.sort(idx)
