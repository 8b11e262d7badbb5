"""Feature standardization, the two classifiers, and the metric suite.

The support-vector classifier delegates the soft-margin dual optimization
to scikit-learn's sequential solver behind a thin wrapper that pins the
kernel-width default, the decision tie rule, and convergence reporting.
The forest classifier shares its tree builder with importance scoring and
predicts by strict majority vote with ties going to class 1.
"""

from __future__ import annotations

import pickle
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVC

from .errors import ConfigError, ConvergenceError, DataError
from .forests import build_forest
from .validation import as_feature_matrix, check_labels

MODEL_MAGIC = b"MIFUSE-MODEL\x00\x00\x00\x00"
MODEL_VERSION = 1


class Standardizer(BaseEstimator, TransformerMixin):
    """Column-wise z-scoring with train-fold statistics.

    Uses the population standard deviation. Constant columns get unit scale
    and are flagged in ``constant_mask_`` so they transform to zeros instead
    of blowing up.
    """

    def fit(self, X, y=None):
        X = as_feature_matrix(X)
        if X.shape[0] < 2:
            raise DataError("standardizer needs at least 2 training rows")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0, ddof=0)
        self.constant_mask_ = std == 0.0
        std = std.copy()
        std[self.constant_mask_] = 1.0
        self.scale_ = std
        return self

    def transform(self, X):
        X = as_feature_matrix(X)
        if X.shape[1] != self.mean_.shape[0]:
            raise DataError(
                f"matrix has {X.shape[1]} features, standardizer was fit on "
                f"{self.mean_.shape[0]}"
            )
        return (X - self.mean_) / self.scale_


def fit_standardizer(X) -> Standardizer:
    return Standardizer().fit(X)


def apply_standardizer(standardizer: Standardizer, X) -> np.ndarray:
    return standardizer.transform(X)


class SvmClassifier(BaseEstimator, ClassifierMixin):
    """Two-class soft-margin SVM with an rbf or linear kernel.

    When ``gamma`` is None the rbf width defaults to
    ``1 / (n_features * mean per-feature variance)`` of the training data.
    A decision value of exactly zero predicts class 1.
    """

    def __init__(self, C: float = 1.0, kernel: str = "rbf",
                 gamma: float | None = None, tol: float = 1e-3,
                 max_iter: int = 100_000):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X = as_feature_matrix(X)
        y = check_labels(y, n=X.shape[0], require_both=True)
        if self.kernel not in ("rbf", "linear"):
            raise ConfigError(f"unsupported kernel {self.kernel!r}")
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if self.gamma is None:
            mean_var = float(np.mean(X.var(axis=0, ddof=0)))
            gamma = 1.0 / (X.shape[1] * mean_var) if mean_var > 0 else 1.0 / X.shape[1]
        else:
            gamma = float(self.gamma)
        self.gamma_ = gamma
        svc = SVC(
            C=self.C, kernel=self.kernel, gamma=gamma,
            tol=self.tol, max_iter=self.max_iter, shrinking=True,
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            svc.fit(X, y)
        if any(issubclass(w.category, ConvergenceWarning) for w in caught):
            raise ConvergenceError(
                f"SVM dual optimization hit the iteration cap "
                f"({self.max_iter}); iterations per problem: {svc.n_iter_.tolist()}"
            )
        self.svc_ = svc
        self.classes_ = svc.classes_
        self.support_vectors_ = svc.support_vectors_
        self.dual_coef_ = svc.dual_coef_
        self.intercept_ = float(svc.intercept_[0])
        self.n_iter_ = int(svc.n_iter_[0])
        if np.any(svc.n_support_ < 1):
            raise ConvergenceError("a class ended up with no support vectors")
        return self

    def decision_function(self, X) -> np.ndarray:
        X = as_feature_matrix(X)
        self._check_dim(X)
        return self.svc_.decision_function(X)

    def predict(self, X) -> np.ndarray:
        decision = self.decision_function(X)
        return np.where(decision > 0, self.classes_[1], self.classes_[0])

    def _check_dim(self, X):
        expected = self.support_vectors_.shape[1]
        if X.shape[1] != expected:
            raise DataError(
                f"matrix has {X.shape[1]} features, model expects {expected}"
            )


def train_svm(X, y, C: float = 1.0, kernel: str = "rbf",
              gamma: float | None = None, tol: float = 1e-3,
              max_iter: int = 100_000) -> SvmClassifier:
    return SvmClassifier(C=C, kernel=kernel, gamma=gamma, tol=tol,
                         max_iter=max_iter).fit(X, y)


def svm_predict(model: SvmClassifier, X) -> np.ndarray:
    return model.predict(X)


class ForestClassifier(BaseEstimator, ClassifierMixin):
    """Bootstrap-bagged decision forest with strict majority voting.

    Vote ties go to class 1. The underlying tree builder is the same one
    used for importance scoring.
    """

    def __init__(self, trees: int = 500, seed: int = 0,
                 max_depth: int | None = None, max_features="sqrt",
                 bootstrap: bool = True):
        self.trees = trees
        self.seed = seed
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap

    def fit(self, X, y):
        X = as_feature_matrix(X)
        y = check_labels(y, n=X.shape[0], require_both=True)
        forest = build_forest(
            trees=self.trees, max_depth=self.max_depth,
            max_features=self.max_features, seed=self.seed,
            bootstrap=self.bootstrap,
        )
        forest.fit(X, y)
        self.forest_ = forest
        self.classes_ = forest.classes_
        return self

    def predict(self, X) -> np.ndarray:
        X = as_feature_matrix(X)
        votes = np.zeros((X.shape[0], len(self.classes_)), dtype=np.int64)
        for tree in self.forest_.estimators_:
            # Trees inside the forest predict encoded class indices.
            encoded = tree.predict(X).astype(np.int64)
            for c in range(len(self.classes_)):
                votes[:, c] += encoded == c
        # argmax takes the first maximum, so ties resolve to the lower class.
        return self.classes_[np.argmax(votes, axis=1)]


def train_rf(X, y, trees: int = 500, seed: int = 0,
             bootstrap: bool = True) -> ForestClassifier:
    return ForestClassifier(trees=trees, seed=seed, bootstrap=bootstrap).fit(X, y)


def rf_predict(model: ForestClassifier, X) -> np.ndarray:
    return model.predict(X)


@dataclass(frozen=True)
class MetricsReport:
    """Accuracy (percent) plus macro-averaged precision, recall, and F1."""

    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    correct: int
    total: int
    per_class: tuple[tuple[int, int, int, int], ...]  # (label, tp, fp, fn)

    def __post_init__(self):
        if self.total < 1:
            raise DataError("metrics need at least one prediction")
        if abs(self.accuracy - 100.0 * self.correct / self.total) > 1e-9:
            raise DataError("accuracy is inconsistent with correct/total counts")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro,
            "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro,
            "correct": self.correct,
            "total": self.total,
            "per_class": [list(row) for row in self.per_class],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            accuracy=float(d["accuracy"]),
            precision_macro=float(d["precision_macro"]),
            recall_macro=float(d["recall_macro"]),
            f1_macro=float(d["f1_macro"]),
            correct=int(d["correct"]),
            total=int(d["total"]),
            per_class=tuple(tuple(int(v) for v in row) for row in d["per_class"]),
        )


def compute_metrics(y_true, y_pred) -> MetricsReport:
    """Confusion-matrix metrics: accuracy = 100 * correct / total.

    Precision, recall, and F1 are macro-averaged over the two classes;
    an undefined precision or recall (zero denominator) counts as zero.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise DataError(
            f"length mismatch: {y_true.shape} true vs {y_pred.shape} predicted"
        )
    if y_true.size == 0:
        raise DataError("metrics need at least one prediction")
    y_true = check_labels(y_true)
    y_pred = check_labels(y_pred)

    correct = int(np.sum(y_true == y_pred))
    total = int(y_true.size)
    precisions, recalls, f1s, per_class = [], [], [], []
    for label in (1, 2):
        tp = int(np.sum((y_pred == label) & (y_true == label)))
        fp = int(np.sum((y_pred == label) & (y_true != label)))
        fn = int(np.sum((y_pred != label) & (y_true == label)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
        per_class.append((label, tp, fp, fn))
    return MetricsReport(
        accuracy=100.0 * correct / total,
        precision_macro=float(np.mean(precisions)),
        recall_macro=float(np.mean(recalls)),
        f1_macro=float(np.mean(f1s)),
        correct=correct,
        total=total,
        per_class=tuple(per_class),
    )


def save_model(model, path) -> Path:
    """Serialize a fitted classifier to the versioned binary container."""
    path = Path(path)
    payload = pickle.dumps(model, protocol=pickle.HIGHEST_PROTOCOL)
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<B", MODEL_VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
    return path


def load_model(path):
    """Load a classifier written by :func:`save_model`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    blob = path.read_bytes()
    header = len(MODEL_MAGIC) + 1 + 8
    if len(blob) < header or blob[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise DataError(f"corrupt model header in {path}")
    version = blob[len(MODEL_MAGIC)]
    if version != MODEL_VERSION:
        raise DataError(f"unsupported model version {version}")
    (size,) = struct.unpack("<Q", blob[len(MODEL_MAGIC) + 1: header])
    payload = blob[header: header + size]
    if len(payload) != size:
        raise DataError(f"truncated model payload in {path}")
    return pickle.loads(payload)
