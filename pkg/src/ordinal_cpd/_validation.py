"""Input validation helpers used by the functional API and the estimators."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigurationError, InvalidInputError


def as_series(x, *, min_length: int = 0, name: str = "series") -> np.ndarray:
    """Return `x` as a finite 1-d float64 array.

    Accepts sequences, numpy arrays, ``TimeSeries`` objects and ``(n, 1)``
    column arrays (the shape scikit-learn hands to transformers).
    """
    samples = getattr(x, "samples", x)
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if arr.size < min_length:
        raise InvalidInputError(
            f"{name} has {arr.size} samples, at least {min_length} required"
        )
    return arr


def check_int(value, name: str, *, minimum: int | None = None,
              maximum: int | None = None, error=InvalidInputError) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise error(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise error(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise error(f"{name} must be <= {maximum}, got {value}")
    return value


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha
