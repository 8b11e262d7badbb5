"""Pipeline configuration: defaults, validation, JSON (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, fields
from pathlib import Path

from .errors import ConfigError, DataError


@dataclass
class PipelineConfig:
    """Every knob of one evaluation run, serializable to a flat JSON file.

    ``selection`` is ``"top:K"``, ``"cum:F"``, or ``"none"``; ``mode`` is
    ``"cv"`` (stratified k-fold) or ``"split"`` (single stratified split).
    """

    band_low: float = 8.0
    band_high: float = 30.0
    band_order: int = 4
    montage: str | None = None
    window_start_s: float = 0.5
    window_end_s: float = 3.0
    csp_pairs: int = 1
    fcm_clusters: int = 2
    fcm_fuzzifier: float = 2.0
    fcm_tol: float = 1e-6
    fcm_max_iter: int = 300
    tangent_variant: str = "sandwiched"
    selection: str = "top:64"
    selection_trees: int = 500
    classifier: str = "svm"
    svm_c: float = 1.0
    svm_kernel: str = "rbf"
    svm_tol: float = 1e-3
    svm_max_iter: int = 100_000
    rf_trees: int = 500
    mode: str = "cv"
    cv_folds: int = 5
    train_fraction: float = 0.8
    seed: int = 0
    subject: str = ""

    def validate(self) -> "PipelineConfig":
        if not (0 < self.band_low < self.band_high):
            raise ConfigError("band edges must satisfy 0 < low < high")
        if self.band_order < 1:
            raise ConfigError("band_order must be at least 1")
        if not self.window_end_s > self.window_start_s:
            raise ConfigError("window end must exceed window start")
        if self.csp_pairs < 1:
            raise ConfigError("csp_pairs must be at least 1")
        if self.fcm_clusters < 2:
            raise ConfigError("fcm_clusters must be at least 2")
        if not self.fcm_fuzzifier > 1.0:
            raise ConfigError("fcm_fuzzifier must exceed 1")
        if not self.fcm_tol > 0:
            raise ConfigError("fcm_tol must be positive")
        if self.tangent_variant not in ("sandwiched", "standard"):
            raise ConfigError(f"unknown tangent_variant {self.tangent_variant!r}")
        if self.selection != "none":
            kind, _, arg = self.selection.partition(":")
            if kind == "top":
                if not arg.isdigit() or int(arg) < 1:
                    raise ConfigError(f"bad selection policy {self.selection!r}")
            elif kind == "cum":
                try:
                    frac = float(arg)
                except ValueError:
                    raise ConfigError(f"bad selection policy {self.selection!r}") from None
                if not (0.0 < frac <= 1.0):
                    raise ConfigError(f"bad selection policy {self.selection!r}")
            else:
                raise ConfigError(f"unknown selection policy {self.selection!r}")
        if self.classifier not in ("svm", "rf"):
            raise ConfigError(f"unknown classifier {self.classifier!r}")
        if self.svm_kernel not in ("rbf", "linear"):
            raise ConfigError(f"unknown svm_kernel {self.svm_kernel!r}")
        if self.mode not in ("cv", "split"):
            raise ConfigError(f"unknown evaluation mode {self.mode!r}")
        if self.mode == "cv" and self.cv_folds < 2:
            raise ConfigError("cv_folds must be at least 2")
        if self.mode == "split" and not (0.0 < self.train_fraction < 1.0):
            raise ConfigError("train_fraction must lie in (0, 1)")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            config = cls(**payload)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        return config.validate()

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"config file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(payload)

    def to_file(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path
