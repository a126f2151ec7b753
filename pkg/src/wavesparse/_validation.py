"""Input checks shared by the estimators."""

import numbers

import numpy as np
from sklearn.utils import check_array

from .signals import ShapeError


def check_signals(X):
    """Validate an ``(n, T)`` or ``(n, G, T)`` float array of finite samples."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        raise ShapeError("expected a stack of signals; reshape a single signal with x[None, :]")
    if X.ndim == 2:
        return check_array(X, dtype=float, ensure_min_samples=1)
    if X.ndim == 3:
        flat = check_array(X.reshape(X.shape[0], -1), dtype=float, ensure_min_samples=1)
        return flat.reshape(X.shape)
    raise ShapeError(f"expected (n, T) or (n, G, T), got {X.ndim}-D input")


def check_features(X, min_samples=2):
    return check_array(X, dtype=float, ensure_min_samples=min_samples)


def check_n_clusters(K, n):
    if not isinstance(K, numbers.Integral) or K < 1:
        raise ValueError(f"n_clusters must be a positive integer, got {K!r}")
    if K > n:
        raise ValueError(f"n_clusters={K} exceeds the number of instances n={n}")
    return int(K)
