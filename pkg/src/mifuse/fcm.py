"""Fuzzy c-means over per-trial region descriptors.

Each trial is summarized by one descriptor vector (the log of the unbiased
temporal variance of every channel in the band-passed block). Soft cluster
memberships of those descriptors form the per-region spectral feature
block. Models are fit on training trials only; held-out trials get
memberships from the frozen centroids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, DataError, NumericalError
from .validation import as_epoch_array, as_float_array

TRACE_TOL = 1e-10


@dataclass(frozen=True)
class FcmModel:
    """Fitted fuzzy c-means centroids with the recorded objective trace."""

    centroids: np.ndarray
    n_clusters: int
    fuzzifier: float
    objective_trace: tuple[float, ...]
    seed: int

    def __post_init__(self):
        centroids = as_float_array(self.centroids, name="centroids", ndim=2)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(
            self, "objective_trace", tuple(float(v) for v in self.objective_trace)
        )
        if self.n_clusters < 2:
            raise ConfigError("n_clusters must be at least 2")
        if centroids.shape[0] != self.n_clusters:
            raise DataError("one centroid row per cluster is required")
        if not self.fuzzifier > 1.0:
            raise ConfigError("fuzzifier must exceed 1")
        trace = self.objective_trace
        if any(b > a + TRACE_TOL for a, b in zip(trace, trace[1:])):
            raise NumericalError("objective trace increased beyond tolerance")


def trial_descriptor(block: np.ndarray) -> np.ndarray:
    """Per-channel log of the unbiased temporal variance of one block."""
    block = as_float_array(block, name="block", ndim=2)
    if block.shape[1] < 2:
        raise DataError("block needs at least 2 samples")
    variances = block.var(axis=1, ddof=1)
    zero = np.flatnonzero(variances <= 0.0)
    if zero.size:
        raise DataError(f"channel {int(zero[0])} has zero variance")
    return np.log(variances)


def _distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - centroids[None, :, :]
    return np.linalg.norm(diff, axis=2)


def fcm_memberships(X: np.ndarray, centroids: np.ndarray, fuzzifier: float) -> np.ndarray:
    """Membership matrix for descriptors ``X`` under the given centroids.

    ``u_ij = (sum_y (||x_i - k_j|| / ||x_i - k_y||)^(2/(m-1)))^(-1)``, with
    the zero-distance limit handled exactly: a point sitting on a centroid
    gets full membership there.
    """
    X = as_float_array(X, name="descriptors", ndim=2)
    centroids = as_float_array(centroids, name="centroids", ndim=2)
    dist = _distances(X, centroids)
    exponent = 2.0 / (fuzzifier - 1.0)
    memberships = np.zeros_like(dist)
    on_centroid = dist == 0.0
    coincident = on_centroid.any(axis=1)
    if coincident.any():
        hits = on_centroid[coincident]
        memberships[coincident] = hits / hits.sum(axis=1, keepdims=True)
    regular = ~coincident
    if regular.any():
        d = dist[regular]
        # Normalizing by each row's smallest distance keeps the powers in
        # [0, 1] and avoids overflow for near-coincident points.
        ratio = d / d.min(axis=1, keepdims=True)
        inv = ratio**-exponent
        memberships[regular] = inv / inv.sum(axis=1, keepdims=True)
    return memberships


def fcm_objective(X: np.ndarray, memberships: np.ndarray, centroids: np.ndarray,
                  fuzzifier: float) -> float:
    """Weighted within-cluster scatter ``sum_ij u_ij^m ||x_i - k_j||^2``."""
    dist = _distances(X, centroids)
    return float(np.sum(memberships**fuzzifier * dist**2))


def _farthest_point_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    chosen = [int(rng.integers(X.shape[0]))]
    for _ in range(k - 1):
        dmin = np.min(
            np.linalg.norm(X[:, None, :] - X[chosen][None, :, :], axis=2), axis=1
        )
        chosen.append(int(np.argmax(dmin)))
    return X[chosen].copy()


def fit_fcm(descriptors, n_clusters: int = 2, fuzzifier: float = 2.0,
            tol: float = 1e-6, max_iter: int = 300, seed: int = 0) -> FcmModel:
    """Fit fuzzy c-means by alternating membership and centroid updates.

    Centroids are seeded from the data by a farthest-point sweep under the
    given seed, so the fit is deterministic. Iteration stops when the
    largest centroid shift drops below ``tol`` or after ``max_iter``
    rounds; the objective is recorded each round and is non-increasing.
    """
    X = as_float_array(descriptors, name="descriptors", ndim=2)
    if n_clusters < 2:
        raise ConfigError("n_clusters must be at least 2")
    if not fuzzifier > 1.0:
        raise ConfigError("fuzzifier must exceed 1")
    if not tol > 0:
        raise ConfigError("tol must be positive")
    if np.unique(X, axis=0).shape[0] < n_clusters:
        raise DataError(
            f"need at least {n_clusters} distinct descriptors to form {n_clusters} clusters"
        )
    rng = np.random.default_rng(seed)
    centroids = _farthest_point_init(X, n_clusters, rng)
    trace: list[float] = []
    for _ in range(max_iter):
        memberships = fcm_memberships(X, centroids, fuzzifier)
        trace.append(fcm_objective(X, memberships, centroids, fuzzifier))
        weights = memberships**fuzzifier
        new_centroids = (weights.T @ X) / weights.sum(axis=0)[:, None]
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break
    memberships = fcm_memberships(X, centroids, fuzzifier)
    trace.append(fcm_objective(X, memberships, centroids, fuzzifier))
    if not all(np.isfinite(trace)):
        raise NumericalError("fuzzy c-means objective became non-finite")
    return FcmModel(
        centroids=centroids,
        n_clusters=int(n_clusters),
        fuzzifier=float(fuzzifier),
        objective_trace=tuple(trace),
        seed=int(seed),
    )


def fcm_membership(x, model: FcmModel) -> np.ndarray:
    """Membership vector of one descriptor under a fitted model."""
    x = as_float_array(x, name="descriptor", ndim=1)
    if x.shape[0] != model.centroids.shape[1]:
        raise DataError(
            f"descriptor length {x.shape[0]} does not match centroid "
            f"dimension {model.centroids.shape[1]}"
        )
    return fcm_memberships(x[None, :], model.centroids, model.fuzzifier)[0]


class FuzzyCMeansFeatures(BaseEstimator, TransformerMixin):
    """Per-region membership features over (n_trials, n_channels, n_samples)."""

    def __init__(self, n_clusters: int = 2, fuzzifier: float = 2.0,
                 tol: float = 1e-6, max_iter: int = 300, seed: int = 0):
        self.n_clusters = n_clusters
        self.fuzzifier = fuzzifier
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, X, y=None):
        X = as_epoch_array(X)
        descriptors = np.stack([trial_descriptor(trial) for trial in X])
        self.model_ = fit_fcm(
            descriptors,
            n_clusters=self.n_clusters,
            fuzzifier=self.fuzzifier,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=self.seed,
        )
        return self

    def transform(self, X):
        X = as_epoch_array(X)
        descriptors = np.stack([trial_descriptor(trial) for trial in X])
        return fcm_memberships(descriptors, self.model_.centroids, self.model_.fuzzifier)
