"""Fused feature vectors and random-forest importance-based selection.

Per-trial feature blocks from every region are concatenated in a canonical
order (montage region order; within a region: spatial filters, cluster
memberships, tangent coordinates) into one fused vector whose block layout
is recorded. Selection scores features by mean Gini-impurity decrease
across a forest and keeps either the top-k or the smallest
cumulative-importance prefix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import ConfigError, DataError
from .forests import build_forest
from .validation import as_feature_matrix, as_float_array, check_labels

BLOCK_ORDER = ("csp", "fcm", "tsm")


@dataclass(frozen=True)
class BlockLayout:
    """Ordered (region, block, offset, length) entries of a fused vector."""

    entries: tuple[tuple[str, str, int, int], ...]

    def __post_init__(self):
        entries = tuple(
            (str(r), str(b), int(o), int(l)) for r, b, o, l in self.entries
        )
        object.__setattr__(self, "entries", entries)
        offset = 0
        for region, block, off, length in entries:
            if off != offset:
                raise DataError(
                    f"layout entry {region}/{block} starts at {off}, expected {offset}"
                )
            if length < 1:
                raise DataError(f"layout entry {region}/{block} has length {length}")
            offset += length

    @property
    def total_length(self) -> int:
        return sum(length for _, _, _, length in self.entries)

    def slice_of(self, region: str, block: str) -> slice:
        for r, b, off, length in self.entries:
            if r == region and b == block:
                return slice(off, off + length)
        raise KeyError(f"{region}/{block}")

    def column_names(self) -> tuple[str, ...]:
        names = []
        for region, block, _, length in self.entries:
            names.extend(f"{region}/{block}[{i}]" for i in range(length))
        return tuple(names)

    def to_list(self) -> list:
        return [list(e) for e in self.entries]

    @classmethod
    def from_list(cls, rows) -> "BlockLayout":
        return cls(entries=tuple((r, b, int(o), int(l)) for r, b, o, l in rows))


@dataclass(frozen=True)
class FusedFeatureVector:
    """One trial's concatenated feature blocks plus their layout."""

    values: np.ndarray
    layout: BlockLayout
    trial_index: int
    label: int

    def __post_init__(self):
        values = as_float_array(self.values, name="values", ndim=1)
        object.__setattr__(self, "values", values)
        if values.shape[0] != self.layout.total_length:
            raise DataError(
                f"fused vector has {values.shape[0]} entries, layout says "
                f"{self.layout.total_length}"
            )

    def block(self, region: str, block: str) -> np.ndarray:
        return self.values[self.layout.slice_of(region, block)]


@dataclass(frozen=True)
class FeatureMatrix:
    """Trials x features matrix with labels and column provenance."""

    values: np.ndarray
    labels: np.ndarray
    column_names: tuple[str, ...]
    layout: BlockLayout | None = None

    def __post_init__(self):
        values = as_feature_matrix(self.values, name="feature matrix")
        labels = check_labels(self.labels, n=values.shape[0])
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if len(self.column_names) != values.shape[1]:
            raise DataError("one column name per feature is required")

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FeatureSelection:
    """Kept column indices with the full importance-score vector."""

    kept_indices: tuple[int, ...]
    importance_scores: np.ndarray
    policy: str

    def __post_init__(self):
        scores = as_float_array(self.importance_scores, name="importance_scores", ndim=1)
        object.__setattr__(self, "importance_scores", scores)
        kept = tuple(int(i) for i in self.kept_indices)
        object.__setattr__(self, "kept_indices", kept)
        if len(set(kept)) != len(kept):
            raise DataError("kept indices must be unique")
        if any(i < 0 or i >= scores.shape[0] for i in kept):
            raise DataError("kept indices outside the score range")
        if np.any(scores < 0):
            raise DataError("importance scores must be non-negative")
        if abs(float(scores.sum()) - 1.0) > 1e-9:
            raise DataError("importance scores must sum to one")


def fuse_trial(region_blocks, region_order, trial_index: int = 0,
               label: int = 1) -> FusedFeatureVector:
    """Concatenate one trial's per-region blocks in canonical order.

    ``region_blocks`` maps region name to a mapping with ``csp``, ``fcm``
    and ``tsm`` vectors; the input order is irrelevant because
    ``region_order`` (the montage order) governs the output.
    """
    parts = []
    entries = []
    offset = 0
    for region in region_order:
        if region not in region_blocks:
            raise DataError(f"missing feature blocks for region {region!r}")
        blocks = region_blocks[region]
        for name in BLOCK_ORDER:
            if name not in blocks:
                raise DataError(f"region {region!r} is missing its {name!r} block")
            vec = as_float_array(blocks[name], name=f"{region}/{name}", ndim=1)
            parts.append(vec)
            entries.append((region, name, offset, vec.shape[0]))
            offset += vec.shape[0]
    layout = BlockLayout(entries=tuple(entries))
    return FusedFeatureVector(
        values=np.concatenate(parts),
        layout=layout,
        trial_index=trial_index,
        label=label,
    )


def fuse_trials(per_trial_blocks, region_order, labels,
                trial_indices=None) -> FeatureMatrix:
    """Fuse a sequence of per-trial block mappings into one feature matrix."""
    labels = check_labels(labels, n=len(per_trial_blocks))
    if trial_indices is None:
        trial_indices = range(len(per_trial_blocks))
    fused = [
        fuse_trial(blocks, region_order, trial_index=int(t), label=int(lab))
        for blocks, t, lab in zip(per_trial_blocks, trial_indices, labels)
    ]
    layout = fused[0].layout
    for vec in fused[1:]:
        if vec.layout != layout:
            raise DataError(
                f"trial {vec.trial_index} produced a different block layout"
            )
    return FeatureMatrix(
        values=np.stack([vec.values for vec in fused]),
        labels=labels,
        column_names=layout.column_names(),
        layout=layout,
    )


def rf_feature_importance(X, y, trees: int = 500, max_depth: int | None = None,
                          seed: int = 0, max_features="sqrt") -> np.ndarray:
    """Mean Gini-impurity decrease per feature, normalized to sum one."""
    X = as_feature_matrix(X)
    y = check_labels(y, n=X.shape[0])
    counts = np.bincount(y, minlength=3)[1:]
    if np.any(counts < 2):
        raise DataError("importance scoring needs at least 2 trials per class")
    if bool(np.all(np.ptp(X, axis=0) == 0.0)):
        raise DataError("all features are constant: no splits are possible")
    forest = build_forest(
        trees=trees, max_depth=max_depth, max_features=max_features, seed=seed
    )
    forest.fit(X, y)
    scores = forest.feature_importances_
    total = float(scores.sum())
    if total <= 0.0:
        raise DataError("forest produced no splits; importances are undefined")
    return scores / total


def _descending_order(scores: np.ndarray) -> np.ndarray:
    # Stable order: descending score, ties broken by lower column index.
    return np.lexsort((np.arange(scores.shape[0]), -scores))


def select_top_k(scores, k: int) -> FeatureSelection:
    """Keep the k highest-scored feature indices (ties favor lower index)."""
    scores = as_float_array(scores, name="scores", ndim=1)
    if k < 1:
        raise ConfigError("k must be at least 1")
    if k > scores.shape[0]:
        raise ConfigError(f"k = {k} exceeds feature count {scores.shape[0]}")
    order = _descending_order(scores)
    kept = tuple(sorted(int(i) for i in order[:k]))
    return FeatureSelection(kept_indices=kept, importance_scores=scores,
                            policy=f"top_k({k})")


def select_cumulative(scores, fraction: float) -> FeatureSelection:
    """Keep the smallest score-descending prefix reaching the given mass."""
    scores = as_float_array(scores, name="scores", ndim=1)
    if not (0.0 < fraction <= 1.0):
        raise ConfigError(f"fraction must lie in (0, 1], got {fraction}")
    total = float(scores.sum())
    if total <= 0.0:
        raise DataError("scores sum to zero; cumulative selection is undefined")
    order = _descending_order(scores)
    cumulative = np.cumsum(scores[order])
    target = fraction * total
    n_keep = int(np.searchsorted(cumulative, target - 1e-12)) + 1
    n_keep = min(n_keep, scores.shape[0])
    kept = tuple(sorted(int(i) for i in order[:n_keep]))
    return FeatureSelection(kept_indices=kept, importance_scores=scores,
                            policy=f"cumulative({fraction})")


def select_features(scores, policy: str) -> FeatureSelection:
    """Dispatch on a policy string: ``top:K`` or ``cum:F``."""
    kind, _, arg = policy.partition(":")
    if kind == "top":
        try:
            return select_top_k(scores, int(arg))
        except ValueError as exc:
            raise ConfigError(f"bad top-k policy {policy!r}") from exc
    if kind == "cum":
        try:
            return select_cumulative(scores, float(arg))
        except ValueError as exc:
            raise ConfigError(f"bad cumulative policy {policy!r}") from exc
    raise ConfigError(f"unknown selection policy {policy!r}")


def apply_selection(fm: FeatureMatrix, selection: FeatureSelection) -> FeatureMatrix:
    """Column-subset a feature matrix; labels pass through unchanged."""
    if not selection.kept_indices:
        raise DataError("selection keeps no features")
    if max(selection.kept_indices) >= fm.n_features:
        raise DataError(
            f"selection index {max(selection.kept_indices)} outside the "
            f"{fm.n_features}-column matrix"
        )
    kept = list(selection.kept_indices)
    return FeatureMatrix(
        values=fm.values[:, kept],
        labels=fm.labels,
        column_names=tuple(fm.column_names[i] for i in kept),
        layout=None,
    )


def feature_matrix_to_csv(fm: FeatureMatrix, path) -> Path:
    """Write a feature matrix as CSV with layout-derived column headers."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", *fm.column_names])
        for row, label in zip(fm.values, fm.labels):
            writer.writerow([int(label), *(repr(float(v)) for v in row)])
    return path


class ImportanceSelector(BaseEstimator, TransformerMixin):
    """Forest-importance feature selector with a top-k or cumulative policy."""

    def __init__(self, policy: str = "top:64", trees: int = 500,
                 max_depth: int | None = None, seed: int = 0):
        self.policy = policy
        self.trees = trees
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, X, y):
        scores = rf_feature_importance(
            X, y, trees=self.trees, max_depth=self.max_depth, seed=self.seed
        )
        self.selection_ = select_features(scores, self.policy)
        self.scores_ = scores
        return self

    def transform(self, X):
        X = as_feature_matrix(X)
        return X[:, list(self.selection_.kept_indices)]
