"""Input checks shared by the functional API and the estimator classes."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DomainError

__all__ = ["check_demand_sample", "check_positive", "check_rank"]


def check_demand_sample(X, *, name: str = "demand") -> np.ndarray:
    """Return ``X`` as a 1-D float array of strictly positive, finite demands.

    Accepts a sequence, a 1-D array or a single-column 2-D array.
    """
    try:
        arr = check_array(
            X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True, input_name=name
        )
    except ValueError as exc:
        raise DomainError(str(exc)) from None
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise DomainError(f"{name} must be a single column, got shape {arr.shape}")
        arr = arr[:, 0]
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise DomainError(f"{name} must be a nonempty 1-D sample")
    if np.any(arr <= 0):
        raise DomainError(f"{name} values must be strictly positive")
    return arr


def check_positive(value, name: str) -> float:
    value = float(value)
    if not (value > 0 and np.isfinite(value)):
        raise DomainError(f"{name} must be positive and finite, got {value}")
    return value


def check_rank(rank, n) -> tuple[int, int]:
    rank, n = int(rank), int(n)
    if n < 1:
        raise DomainError(f"sample size must be positive, got {n}")
    if not 1 <= rank <= n:
        raise DomainError(f"rank must lie in [1, {n}], got {rank}")
    return rank, n
