"""Cross-validated evaluation with leakage guards, ablation, and reports.

Every fold refits the whole chain (filter design, spatial filters, cluster
centroids, Riemannian mean, standardizer, selection, classifier) on its
training trials only. A content hash of the held-out trials taken before
fitting is re-checked after scoring, and train/test trial indices must be
disjoint; violations raise ``LeakageError``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import ForestClassifier, MetricsReport, Standardizer, SvmClassifier, compute_metrics
from .config import PipelineConfig
from .dataset import EpochSet
from .errors import ConfigError, DataError, LeakageError, MiFuseError
from .fusion import rf_feature_importance, select_features
from .pipeline import RegionFusionExtractor
from .preprocessing import ChannelGroups, load_montage
from .seeding import derive_seed

METRIC_KEYS = ("accuracy", "precision_macro", "recall_macro", "f1_macro")


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """Assign each trial to one of ``k`` folds, stratified by class.

    Fold sizes differ by at most one and every fold's class counts are
    within one trial of the global proportion. Deterministic per seed.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise DataError("labels must be a non-empty vector")
    if k < 2:
        raise ConfigError("k must be at least 2")
    rng = np.random.default_rng(seed)
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    fold_sizes = np.zeros(k, dtype=np.int64)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < k:
            raise DataError(f"class {cls} has {idx.size} trials, fewer than k = {k}")
        rng.shuffle(idx)
        base, extra = divmod(idx.size, k)
        counts = np.full(k, base, dtype=np.int64)
        # Hand the remainder to the currently smallest folds (ties by index)
        # so overall fold sizes never spread by more than one.
        order = np.lexsort((np.arange(k), fold_sizes))
        counts[order[:extra]] += 1
        pos = 0
        for f in range(k):
            assignment[idx[pos:pos + counts[f]]] = f
            pos += counts[f]
        fold_sizes += counts
    return assignment


def stratified_split(labels, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """One stratified train/test split; both classes appear on both sides."""
    labels = np.asarray(labels)
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise DataError(f"class {cls} needs at least 2 trials to split")
        rng.shuffle(idx)
        n_train = int(round(train_fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)
        train.extend(idx[:n_train])
        test.extend(idx[n_train:])
    return np.sort(np.array(train)), np.sort(np.array(test))


def _epoch_set_digest(epoch_set: EpochSet) -> str:
    h = hashlib.sha256()
    for ep in epoch_set.epochs:
        h.update(np.int64(ep.trial_index).tobytes())
        h.update(np.int64(ep.label).tobytes())
        h.update(np.ascontiguousarray(ep.data, dtype="<f8").tobytes())
    return h.hexdigest()


def _resolve_groups(epochs: EpochSet, config: PipelineConfig,
                    groups: ChannelGroups | None) -> ChannelGroups:
    if groups is not None:
        return groups
    if config.montage:
        return load_montage(config.montage, epochs.channel_names)
    raise ConfigError("no montage configured and no channel groups supplied")


class _Stage:
    """Context manager that prefixes component errors with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, MiFuseError):
            exc.args = (f"[{self.name}] {exc.args[0] if exc.args else ''}",) + exc.args[1:]
        return False


def run_pipeline_fold(train: EpochSet, test: EpochSet, config: PipelineConfig,
                      groups: ChannelGroups | None = None, fold_index: int = 0,
                      master_seed: int | None = None) -> MetricsReport:
    """Fit the full chain on the training set and score the held-out set."""
    config.validate()
    if master_seed is None:
        master_seed = config.seed
    groups = _resolve_groups(train, config, groups)

    train_ids = set(int(i) for i in train.trial_indices())
    test_ids = set(int(i) for i in test.trial_indices())
    overlap = train_ids & test_ids
    if overlap:
        raise LeakageError(
            f"train and test folds share trial indices {sorted(overlap)[:5]}"
        )
    test_digest = _epoch_set_digest(test)

    with _Stage("features"):
        extractor = RegionFusionExtractor(
            groups=groups,
            fs=train.sampling_rate_hz,
            band_low=config.band_low,
            band_high=config.band_high,
            band_order=config.band_order,
            csp_pairs=config.csp_pairs,
            fcm_clusters=config.fcm_clusters,
            fcm_fuzzifier=config.fcm_fuzzifier,
            fcm_tol=config.fcm_tol,
            fcm_max_iter=config.fcm_max_iter,
            tangent_variant=config.tangent_variant,
            seed=derive_seed(master_seed, "features", fold_index),
        )
        extractor.fit(train.stack(), train.labels())
        train_fm = extractor.extract(
            train.stack(), train.labels(), trial_indices=train.trial_indices()
        )
        test_fm = extractor.extract(
            test.stack(), test.labels(), trial_indices=test.trial_indices()
        )

    with _Stage("standardize"):
        standardizer = Standardizer().fit(train_fm.values)
        train_X = standardizer.transform(train_fm.values)
        test_X = standardizer.transform(test_fm.values)

    if config.selection != "none":
        with _Stage("selection"):
            scores = rf_feature_importance(
                train_X, train_fm.labels,
                trees=config.selection_trees,
                seed=derive_seed(master_seed, "selection", fold_index),
            )
            selection = select_features(scores, config.selection)
            kept = list(selection.kept_indices)
            train_X = train_X[:, kept]
            test_X = test_X[:, kept]

    with _Stage("classifier"):
        if config.classifier == "svm":
            model = SvmClassifier(
                C=config.svm_c, kernel=config.svm_kernel,
                tol=config.svm_tol, max_iter=config.svm_max_iter,
            )
        else:
            model = ForestClassifier(
                trees=config.rf_trees,
                seed=derive_seed(master_seed, "classifier", fold_index),
            )
        model.fit(train_X, train_fm.labels)
        predictions = model.predict(test_X)

    if _epoch_set_digest(test) != test_digest:
        raise LeakageError("held-out epochs were modified during the fold run")
    return compute_metrics(test_fm.labels, predictions)


@dataclass
class CvReport:
    """Per-fold metrics plus aggregates, config snapshot, and seeds.

    ``wall_clock_s`` is informational: it is excluded from equality and
    from the canonical JSON so that identical runs serialize identically.
    """

    mode: str
    subject: str
    fold_metrics: tuple[MetricsReport, ...]
    mean: dict[str, float]
    std: dict[str, float]
    n_trials: int
    config: dict
    master_seed: int
    wall_clock_s: float = field(default=0.0, compare=False)

    def __post_init__(self):
        self.fold_metrics = tuple(self.fold_metrics)
        for key in METRIC_KEYS:
            folds = [getattr(m, key) for m in self.fold_metrics]
            if abs(self.mean[key] - float(np.mean(folds))) > 1e-9:
                raise DataError(f"aggregate mean for {key} does not match the folds")

    @property
    def n_folds(self) -> int:
        return len(self.fold_metrics)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "mode": self.mode,
            "subject": self.subject,
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "config": self.config,
            "folds": [m.to_dict() for m in self.fold_metrics],
            "mean": self.mean,
            "std": self.std,
        }
        if include_timing:
            d["wall_clock_s"] = self.wall_clock_s
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CvReport":
        return cls(
            mode=str(d["mode"]),
            subject=str(d["subject"]),
            fold_metrics=tuple(MetricsReport.from_dict(m) for m in d["folds"]),
            mean={k: float(v) for k, v in d["mean"].items()},
            std={k: float(v) for k, v in d["std"].items()},
            n_trials=int(d["n_trials"]),
            config=dict(d["config"]),
            master_seed=int(d["master_seed"]),
            wall_clock_s=float(d.get("wall_clock_s", 0.0)),
        )


def _aggregate(fold_metrics, mode: str, subject: str, n_trials: int,
               config: PipelineConfig, elapsed: float) -> CvReport:
    mean = {k: float(np.mean([getattr(m, k) for m in fold_metrics])) for k in METRIC_KEYS}
    std = {k: float(np.std([getattr(m, k) for m in fold_metrics])) for k in METRIC_KEYS}
    return CvReport(
        mode=mode,
        subject=subject,
        fold_metrics=tuple(fold_metrics),
        mean=mean,
        std=std,
        n_trials=n_trials,
        config=config.to_dict(),
        master_seed=config.seed,
        wall_clock_s=elapsed,
    )


def run_cv(epochs: EpochSet, config: PipelineConfig,
           groups: ChannelGroups | None = None) -> CvReport:
    """Stratified k-fold evaluation; every stage refits per fold."""
    config.validate()
    started = time.perf_counter()
    groups = _resolve_groups(epochs, config, groups)
    labels = epochs.labels()
    folds = stratified_kfold(labels, config.cv_folds, derive_seed(config.seed, "folds"))
    fold_metrics = []
    for f in range(config.cv_folds):
        test_idx = np.flatnonzero(folds == f)
        train_idx = np.flatnonzero(folds != f)
        fold_metrics.append(
            run_pipeline_fold(
                epochs.subset(train_idx), epochs.subset(test_idx),
                config, groups=groups, fold_index=f, master_seed=config.seed,
            )
        )
    return _aggregate(
        fold_metrics, mode=f"cv-k{config.cv_folds}", subject=config.subject,
        n_trials=len(epochs), config=config, elapsed=time.perf_counter() - started,
    )


def run_split(epochs: EpochSet, config: PipelineConfig,
              groups: ChannelGroups | None = None) -> CvReport:
    """Single stratified train/test split evaluation."""
    config.validate()
    started = time.perf_counter()
    groups = _resolve_groups(epochs, config, groups)
    train_idx, test_idx = stratified_split(
        epochs.labels(), config.train_fraction, derive_seed(config.seed, "split")
    )
    report = run_pipeline_fold(
        epochs.subset(train_idx), epochs.subset(test_idx),
        config, groups=groups, fold_index=0, master_seed=config.seed,
    )
    return _aggregate(
        [report], mode=f"split-{config.train_fraction:g}", subject=config.subject,
        n_trials=len(epochs), config=config, elapsed=time.perf_counter() - started,
    )


def run_evaluation(epochs: EpochSet, config: PipelineConfig,
                   groups: ChannelGroups | None = None) -> CvReport:
    if config.mode == "cv":
        return run_cv(epochs, config, groups=groups)
    return run_split(epochs, config, groups=groups)


@dataclass
class AblationReport:
    """Paired runs under identical folds: with and without selection."""

    with_selection: CvReport
    without_selection: CvReport

    def comparison_rows(self) -> list[dict]:
        rows = []
        for key in METRIC_KEYS:
            rows.append({
                "metric": key,
                "with_selection": self.with_selection.mean[key],
                "without_selection": self.without_selection.mean[key],
                "difference": self.with_selection.mean[key]
                - self.without_selection.mean[key],
            })
        return rows


def run_ablation(epochs: EpochSet, config: PipelineConfig,
                 groups: ChannelGroups | None = None) -> AblationReport:
    """Run the configured pipeline with and without the selection stage.

    Both arms share the exact same seeds, hence the same fold assignment;
    they differ only in whether feature selection runs.
    """
    config.validate()
    groups = _resolve_groups(epochs, config, groups)
    with_cfg = PipelineConfig(**config.to_dict())
    without_cfg = PipelineConfig(**{**config.to_dict(), "selection": "none"})
    labels = epochs.labels()
    if config.mode == "cv":
        folds_a = stratified_kfold(labels, config.cv_folds, derive_seed(config.seed, "folds"))
        folds_b = stratified_kfold(labels, config.cv_folds, derive_seed(config.seed, "folds"))
        if not np.array_equal(folds_a, folds_b):
            raise LeakageError("fold assignments diverged between ablation arms")
    return AblationReport(
        with_selection=run_evaluation(epochs, with_cfg, groups=groups),
        without_selection=run_evaluation(epochs, without_cfg, groups=groups),
    )


def report_to_json(report: CvReport, include_timing: bool = False) -> str:
    """Canonical JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(
        report.to_dict(include_timing=include_timing),
        sort_keys=True, indent=2,
    ) + "\n"


def emit_report(report: CvReport, fmt: str, path,
                include_timing: bool = False) -> Path:
    """Write a report as canonical JSON or per-fold CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(report_to_json(report, include_timing=include_timing),
                        encoding="utf-8")
        return path
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "fold", "n_test", "correct",
                "accuracy", "precision_macro", "recall_macro", "f1_macro",
            ])
            for i, m in enumerate(report.fold_metrics):
                writer.writerow([
                    i, m.total, m.correct,
                    f"{m.accuracy:.6f}", f"{m.precision_macro:.6f}",
                    f"{m.recall_macro:.6f}", f"{m.f1_macro:.6f}",
                ])
            totals = sum(m.total for m in report.fold_metrics)
            corrects = sum(m.correct for m in report.fold_metrics)
            writer.writerow([
                "mean", totals, corrects,
                f"{report.mean['accuracy']:.6f}",
                f"{report.mean['precision_macro']:.6f}",
                f"{report.mean['recall_macro']:.6f}",
                f"{report.mean['f1_macro']:.6f}",
            ])
        return path
    raise ConfigError(f"unknown report format {fmt!r}")


def load_report(path) -> CvReport:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    try:
        return CvReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"cannot parse report {path}: {exc}") from exc
