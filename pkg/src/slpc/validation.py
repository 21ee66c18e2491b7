"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

__all__ = ["check_points", "check_positive", "check_probability"]


def check_points(X, d: int | None = None, min_rows: int = 1) -> np.ndarray:
    """Validate a 2-D array of finite points, optionally of fixed width."""
    X = check_array(X, dtype=float, ensure_2d=True, ensure_all_finite=True,
                    ensure_min_samples=min_rows)
    if d is not None and X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {X.shape[1]}")
    return X


def check_positive(value, name: str, strict: bool = True) -> float:
    value = float(value)
    if (value <= 0) if strict else (value < 0):
        bound = "positive" if strict else "non-negative"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_probability(value, name: str) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {value}")
    return value
