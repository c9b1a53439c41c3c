"""Input validation helpers shared across estimators and kernel routines."""
from __future__ import annotations

import numpy as np


def check_matrix(X, name: str = "X", *, ensure_2d: bool = True) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if ensure_2d:
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2:
            raise ValueError(f"{name} must be a 2-D array, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_labels(y, name: str = "y") -> np.ndarray:
    y = np.asarray(y)
    vals = np.unique(y)
    if not np.all(np.isin(vals, (-1, 1))):
        raise ValueError(f"{name} must contain only -1/+1 labels, got {vals}")
    if len(vals) < 2:
        raise ValueError(f"{name} contains a single class")
    return y.astype(int)


def check_square(K, name: str = "K") -> np.ndarray:
    K = check_matrix(K, name)
    if K.shape[0] != K.shape[1]:
        raise ValueError(f"{name} must be square, got shape {K.shape}")
    return K


def check_symmetric(K, name: str = "K", tol: float = 1e-8) -> np.ndarray:
    K = check_square(K, name)
    if K.size and np.max(np.abs(K - K.T)) > tol:
        raise ValueError(f"{name} is not symmetric within {tol}")
    return K
