"""Input validation helpers used at kernel and estimator boundaries."""

from __future__ import annotations

import numpy as np

from .errors import DataError

VALID_LABELS = (1, 2)


def as_float_array(values, name: str = "array", ndim: int | None = None) -> np.ndarray:
    """Coerce to a finite float64 ndarray, optionally enforcing dimensionality."""
    arr = np.asarray(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise DataError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def as_feature_matrix(X, name: str = "X") -> np.ndarray:
    """Validate a (n_trials, n_features) feature matrix."""
    X = as_float_array(X, name=name, ndim=2)
    if X.shape[0] == 0:
        raise DataError(f"{name} has no rows")
    return X


def as_epoch_array(X, name: str = "X") -> np.ndarray:
    """Validate a (n_trials, n_channels, n_samples) epoch array."""
    X = as_float_array(X, name=name, ndim=3)
    if X.shape[0] == 0:
        raise DataError(f"{name} has no trials")
    if X.shape[2] < 2:
        raise DataError(f"{name} needs at least 2 samples per trial")
    return X


def check_labels(y, n: int | None = None, require_both: bool = False) -> np.ndarray:
    """Validate a two-class label vector with labels drawn from {1, 2}."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise DataError(f"labels must be 1-dimensional, got shape {y.shape}")
    y = y.astype(np.int64)
    bad = set(np.unique(y)) - set(VALID_LABELS)
    if bad:
        raise DataError(f"labels must be in {VALID_LABELS}, found {sorted(bad)}")
    if n is not None and y.shape[0] != n:
        raise DataError(f"label count {y.shape[0]} does not match trial count {n}")
    if require_both and len(np.unique(y)) < 2:
        raise DataError("both classes must be present")
    return y


def check_symmetric(M, name: str = "matrix", tol: float = 1e-10) -> np.ndarray:
    """Validate symmetry to relative tolerance and return the symmetrized matrix."""
    M = as_float_array(M, name=name, ndim=2)
    if M.shape[0] != M.shape[1]:
        raise DataError(f"{name} must be square, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max())) if M.size else 1.0
    if float(np.abs(M - M.T).max()) > tol * scale:
        raise DataError(f"{name} is not symmetric to tolerance {tol}")
    return 0.5 * (M + M.T)


def check_spd(M, name: str = "matrix") -> np.ndarray:
    """Validate that a matrix is symmetric positive definite."""
    M = check_symmetric(M, name=name)
    smallest = float(np.linalg.eigvalsh(M)[0])
    if smallest <= 0.0:
        raise DataError(f"{name} is not positive definite (smallest eigenvalue {smallest:g})")
    return M


def check_same_shape(A: np.ndarray, B: np.ndarray, name: str = "matrices") -> None:
    if A.shape != B.shape:
        raise DataError(f"{name} have mismatched shapes {A.shape} vs {B.shape}")
