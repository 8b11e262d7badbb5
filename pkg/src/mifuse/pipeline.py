"""End-to-end feature extraction: band-pass, region grouping, and fusion.

``RegionFusionExtractor`` is the estimator that turns raw epochs into the
fused feature matrix. Fitting learns everything data-dependent from the
training trials only: spatial filters and cluster centroids per region,
plus the Riemannian reference point for the tangent projection. Transform
then maps any epoch array (train or held-out) to fused vectors.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .csp import csp_features, fit_csp, normalized_covariance
from .errors import DataError
from .fcm import fcm_memberships, fit_fcm, trial_descriptor
from .fusion import FeatureMatrix, fuse_trials
from .geometry import riemannian_mean, tangent_project, vectorize_symmetric
from .preprocessing import ChannelGroups, design_bandpass, filter_array, group_epoch_array
from .seeding import derive_seed
from .validation import as_epoch_array, check_labels


class TangentFeatures(BaseEstimator, TransformerMixin):
    """Tangent-space coordinates of per-trial covariances for one region."""

    def __init__(self, variant: str = "sandwiched", tol: float = 1e-8, max_iter: int = 50):
        self.variant = variant
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = as_epoch_array(X)
        covs = [normalized_covariance(trial) for trial in X]
        self.mean_ = riemannian_mean(covs, tol=self.tol, max_iter=self.max_iter)
        return self

    def transform(self, X):
        X = as_epoch_array(X)
        return np.stack([
            vectorize_symmetric(
                tangent_project(normalized_covariance(trial), self.mean_, self.variant)
            )
            for trial in X
        ])


class RegionFusionExtractor(BaseEstimator, TransformerMixin):
    """Fuse per-region spatial, membership, and tangent features.

    For every region in montage order the transform emits, in this order:
    ``2 * csp_pairs`` log-variance features of the learned spatial filters,
    ``fcm_clusters`` soft cluster memberships of the trial descriptor, and
    ``n (n + 1) / 2`` tangent coordinates of the trial covariance at the
    training Riemannian mean (``n`` being the region's channel count).

    Parameters
    ----------
    groups : ChannelGroups
        Region grouping over the full channel set.
    fs : float
        Sampling rate of the epochs in Hz.
    band_low, band_high, band_order : float, float, int
        Zero-phase band-pass applied before any feature extraction.
    csp_pairs : int
        Filter pairs retained per region.
    fcm_clusters, fcm_fuzzifier, fcm_tol, fcm_max_iter : clustering knobs.
    tangent_variant : str
        ``"sandwiched"`` or ``"standard"`` tangent construction.
    seed : int
        Master seed; per-region clustering seeds are derived from it.
    """

    def __init__(self, groups: ChannelGroups, fs: float,
                 band_low: float = 8.0, band_high: float = 30.0,
                 band_order: int = 4, csp_pairs: int = 1,
                 fcm_clusters: int = 2, fcm_fuzzifier: float = 2.0,
                 fcm_tol: float = 1e-6, fcm_max_iter: int = 300,
                 tangent_variant: str = "sandwiched", karcher_tol: float = 1e-8,
                 karcher_max_iter: int = 50, seed: int = 0):
        self.groups = groups
        self.fs = fs
        self.band_low = band_low
        self.band_high = band_high
        self.band_order = band_order
        self.csp_pairs = csp_pairs
        self.fcm_clusters = fcm_clusters
        self.fcm_fuzzifier = fcm_fuzzifier
        self.fcm_tol = fcm_tol
        self.fcm_max_iter = fcm_max_iter
        self.tangent_variant = tangent_variant
        self.karcher_tol = karcher_tol
        self.karcher_max_iter = karcher_max_iter
        self.seed = seed

    def fit(self, X, y):
        X = as_epoch_array(X)
        y = check_labels(y, n=X.shape[0], require_both=True)
        self.coeffs_ = design_bandpass(
            self.band_low, self.band_high, self.fs, self.band_order
        )
        filtered = filter_array(X, self.coeffs_)
        blocks = group_epoch_array(filtered, self.groups)
        self.banks_ = {}
        self.fcm_models_ = {}
        self.tangent_means_ = {}
        for region, block in blocks.items():
            covs = [normalized_covariance(trial) for trial in block]
            self.banks_[region] = fit_csp(
                [covs[i] for i in np.flatnonzero(y == 1)],
                [covs[i] for i in np.flatnonzero(y == 2)],
                pairs=self.csp_pairs,
                region=region,
            )
            descriptors = np.stack([trial_descriptor(trial) for trial in block])
            self.fcm_models_[region] = fit_fcm(
                descriptors,
                n_clusters=self.fcm_clusters,
                fuzzifier=self.fcm_fuzzifier,
                tol=self.fcm_tol,
                max_iter=self.fcm_max_iter,
                seed=derive_seed(self.seed, "fcm", region),
            )
            self.tangent_means_[region] = riemannian_mean(
                covs, tol=self.karcher_tol, max_iter=self.karcher_max_iter
            )
        return self

    def extract(self, X, y, trial_indices=None) -> FeatureMatrix:
        """Transform epochs into a labeled feature matrix with block layout."""
        X = as_epoch_array(X)
        y = check_labels(y, n=X.shape[0])
        filtered = filter_array(X, self.coeffs_)
        blocks = group_epoch_array(filtered, self.groups)
        per_trial = [dict() for _ in range(X.shape[0])]
        for region in self.groups.names:
            block = blocks[region]
            bank = self.banks_[region]
            model = self.fcm_models_[region]
            mean = self.tangent_means_[region]
            descriptors = np.stack([trial_descriptor(trial) for trial in block])
            memberships = fcm_memberships(descriptors, model.centroids, model.fuzzifier)
            for t in range(X.shape[0]):
                per_trial[t][region] = {
                    "csp": csp_features(bank, block[t]),
                    "fcm": memberships[t],
                    "tsm": vectorize_symmetric(
                        tangent_project(
                            normalized_covariance(block[t]), mean, self.tangent_variant
                        )
                    ),
                }
        return fuse_trials(per_trial, self.groups.names, y, trial_indices=trial_indices)

    def transform(self, X):
        if not hasattr(self, "banks_"):
            raise DataError("extractor is not fitted")
        X = as_epoch_array(X)
        # Labels are irrelevant for the transform itself; reuse class 1.
        dummy = np.ones(X.shape[0], dtype=np.int64)
        return self.extract(X, dummy).values
