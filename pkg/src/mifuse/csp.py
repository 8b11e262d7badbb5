"""Common-spatial-pattern filters and log-variance features for one region.

The spatial filters solve the two-class generalized eigenproblem
``S1 v = lambda (S1 + S2) v`` where ``S1`` and ``S2`` are the per-class
arithmetic means of trace-normalized trial covariances. Solving goes
through whitening of the composite covariance rather than a direct
generalized solve, which is more robust on near-singular inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, DataError
from .geometry import regularize_spd, spd_power
from .validation import as_epoch_array, as_float_array, check_labels, check_symmetric

DEGENERATE_SPREAD = 1e-12


@dataclass(frozen=True)
class SpatialFilterBank:
    """Fitted spatial filters for one channel group.

    ``filters`` has one unit-norm column per retained component,
    ``pairs`` from each end of the eigenvalue spectrum; ``eigenvalues``
    holds the matching generalized eigenvalues in descending order.
    """

    filters: np.ndarray
    pairs: int
    region: str
    eigenvalues: tuple[float, ...]

    def __post_init__(self):
        filters = as_float_array(self.filters, name="filters", ndim=2)
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in self.eigenvalues))
        if filters.shape[1] != 2 * self.pairs:
            raise DataError(
                f"filter bank has {filters.shape[1]} columns, expected {2 * self.pairs}"
            )
        if len(self.eigenvalues) != 2 * self.pairs:
            raise DataError("one eigenvalue per filter column is required")
        if any(b > a for a, b in zip(self.eigenvalues, self.eigenvalues[1:])):
            raise DataError("eigenvalues must be sorted in descending order")

    @property
    def n_channels(self) -> int:
        return self.filters.shape[0]


def normalized_covariance(block: np.ndarray) -> np.ndarray:
    """Trace-normalized spatial covariance ``E E^T / tr(E E^T)`` of one block.

    The result has unit trace and is nudged onto the positive-definite cone
    when rank-deficient.
    """
    block = as_float_array(block, name="block", ndim=2)
    if block.shape[1] < 2:
        raise DataError("block needs at least 2 samples")
    gram = block @ block.T
    gram = 0.5 * (gram + gram.T)  # BLAS products are not bitwise symmetric
    trace = float(np.trace(gram))
    if trace <= 0.0:
        raise DataError("zero-energy block: covariance trace is not positive")
    return regularize_spd(gram / trace)


def csp_eigensystem(s1: np.ndarray, s2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full solution of ``S1 v = lambda (S1 + S2) v`` via composite whitening.

    Returns eigenvalues in descending order and the matching eigenvector
    columns, scaled so that ``V^T (S1 + S2) V = I``. With that scaling
    ``V^T S1 V`` and ``V^T S2 V`` are simultaneously diagonal and the
    paired diagonal entries sum to one.
    """
    s1 = check_symmetric(s1, name="S1")
    s2 = check_symmetric(s2, name="S2")
    composite = regularize_spd(s1 + s2)
    whitener = spd_power(composite, -0.5)
    inner = whitener @ s1 @ whitener
    eigvals, eigvecs = np.linalg.eigh(0.5 * (inner + inner.T))
    order = np.argsort(eigvals)[::-1]
    return eigvals[order], whitener @ eigvecs[:, order]


def fit_csp(covs_class1, covs_class2, pairs: int = 1, region: str = "") -> SpatialFilterBank:
    """Fit spatial filters from per-trial covariances of the two classes.

    Retains ``pairs`` eigenvectors from each spectral extreme, rescaled to
    unit Euclidean norm with a deterministic sign (largest-magnitude entry
    positive).
    """
    covs1 = [as_float_array(C, name="covs_class1", ndim=2) for C in covs_class1]
    covs2 = [as_float_array(C, name="covs_class2", ndim=2) for C in covs_class2]
    if not covs1 or not covs2:
        raise DataError("both classes need at least one covariance matrix")
    dim = covs1[0].shape[0]
    if any(C.shape != (dim, dim) for C in covs1 + covs2):
        raise DataError("covariance matrices must share one square shape")
    if pairs < 1:
        raise ConfigError("pairs must be at least 1")
    if 2 * pairs > dim:
        raise ConfigError(f"2*pairs = {2 * pairs} exceeds channel count {dim}")

    s1 = np.mean(covs1, axis=0)
    s2 = np.mean(covs2, axis=0)
    eigvals, eigvecs = csp_eigensystem(s1, s2)
    if float(eigvals[0] - eigvals[-1]) < DEGENERATE_SPREAD:
        raise DataError(
            "degenerate classes: the class covariances admit no discriminative direction"
        )
    keep = list(range(pairs)) + list(range(dim - pairs, dim))
    filters = eigvecs[:, keep].copy()
    for j in range(filters.shape[1]):
        col = filters[:, j]
        col /= np.linalg.norm(col)
        if col[np.argmax(np.abs(col))] < 0:
            col *= -1.0
    return SpatialFilterBank(
        filters=filters,
        pairs=int(pairs),
        region=region,
        eigenvalues=tuple(float(eigvals[k]) for k in keep),
    )


def csp_features(bank: SpatialFilterBank, block: np.ndarray) -> np.ndarray:
    """Log-variance of each spatially filtered signal.

    ``f_w = log(var(v_w^T x))`` with the unbiased sample variance over time.
    """
    block = as_float_array(block, name="block", ndim=2)
    if block.shape[0] != bank.n_channels:
        raise DataError(
            f"block has {block.shape[0]} channels, filter bank expects {bank.n_channels}"
        )
    projected = bank.filters.T @ block
    variances = projected.var(axis=1, ddof=1)
    zero = np.flatnonzero(variances <= 0.0)
    if zero.size:
        raise DataError(f"projected variance is zero for filter {int(zero[0])}")
    return np.log(variances)


class CspFeatures(BaseEstimator, TransformerMixin):
    """Per-region CSP feature extractor over (n_trials, n_channels, n_samples)."""

    def __init__(self, pairs: int = 1, region: str = ""):
        self.pairs = pairs
        self.region = region

    def fit(self, X, y):
        X = as_epoch_array(X)
        y = check_labels(y, n=X.shape[0], require_both=True)
        covs = [normalized_covariance(trial) for trial in X]
        self.bank_ = fit_csp(
            [covs[i] for i in np.flatnonzero(y == 1)],
            [covs[i] for i in np.flatnonzero(y == 2)],
            pairs=self.pairs,
            region=self.region,
        )
        return self

    def transform(self, X):
        X = as_epoch_array(X)
        return np.stack([csp_features(self.bank_, trial) for trial in X])
