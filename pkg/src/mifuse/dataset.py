"""Recording I/O, epoch extraction, synthetic data, and epoch-set persistence.

The on-disk interchange is deliberately minimal: a JSON manifest describing
one continuous multichannel recording plus a raw little-endian float64 data
file (channel-major). Converting vendor formats into this pair is a user
step documented in the README; no .mat/EDF/GDF parsing lives here.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .validation import VALID_LABELS, check_labels

EPOCHS_MAGIC = b"MIFUSE-EPOCHS\x00\x00\x00"
EPOCHS_VERSION = 1


@dataclass(frozen=True)
class DatasetManifest:
    """Identity and layout of one continuous recording."""

    name: str
    sampling_rate_hz: float
    channel_names: tuple[str, ...]
    data_file: str | None
    markers: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "channel_names", tuple(str(c) for c in self.channel_names))
        object.__setattr__(
            self, "markers", tuple((int(o), int(l)) for o, l in self.markers)
        )
        if not self.sampling_rate_hz > 0:
            raise DataError("sampling_rate_hz must be positive")
        if len(self.channel_names) < 1:
            raise DataError("manifest needs at least one channel")
        onsets = [o for o, _ in self.markers]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise DataError("marker onsets must be strictly increasing")
        bad = [l for _, l in self.markers if l not in VALID_LABELS]
        if bad:
            raise DataError(f"marker labels must be in {VALID_LABELS}, found {sorted(set(bad))}")

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channel_names"] = list(self.channel_names)
        d["markers"] = [[o, l] for o, l in self.markers]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        try:
            return cls(
                name=str(d["name"]),
                sampling_rate_hz=float(d["sampling_rate_hz"]),
                channel_names=tuple(d["channel_names"]),
                data_file=d.get("data_file"),
                markers=tuple((int(o), int(l)) for o, l in d.get("markers", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid manifest: {exc}") from exc


@dataclass(frozen=True)
class ContinuousRecording:
    """One continuous multichannel recording with its manifest."""

    manifest: DatasetManifest
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2:
            raise DataError(f"samples must be 2-dimensional, got shape {samples.shape}")
        if samples.shape[0] != self.manifest.n_channels:
            raise DataError(
                f"samples have {samples.shape[0]} rows, manifest lists "
                f"{self.manifest.n_channels} channels"
            )
        if not np.all(np.isfinite(samples)):
            raise DataError("recording contains non-finite samples")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class Epoch:
    """One trial: a channels x samples slice with its class label."""

    data: np.ndarray
    label: int
    trial_index: int
    sampling_rate_hz: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        if data.ndim != 2:
            raise DataError(f"epoch data must be 2-dimensional, got shape {data.shape}")
        if data.shape[1] < 2:
            raise DataError("epoch needs at least 2 samples")
        if not np.all(np.isfinite(data)):
            raise DataError("epoch contains non-finite values")
        if self.label not in VALID_LABELS:
            raise DataError(f"epoch label must be in {VALID_LABELS}, got {self.label}")
        if not self.sampling_rate_hz > 0:
            raise DataError("sampling_rate_hz must be positive")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class EpochSet:
    """A homogeneous collection of epochs sharing channels, length, and rate."""

    epochs: tuple[Epoch, ...]
    channel_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "epochs", tuple(self.epochs))
        object.__setattr__(self, "channel_names", tuple(str(c) for c in self.channel_names))
        n_ch = len(self.channel_names)
        for ep in self.epochs:
            if ep.n_channels != n_ch:
                raise DataError(
                    f"epoch {ep.trial_index} has {ep.n_channels} channels, expected {n_ch}"
                )
        if self.epochs:
            first = self.epochs[0]
            for ep in self.epochs:
                if ep.n_samples != first.n_samples:
                    raise DataError("all epochs must share the same length")
                if ep.sampling_rate_hz != first.sampling_rate_hz:
                    raise DataError("all epochs must share the same sampling rate")

    def __len__(self) -> int:
        return len(self.epochs)

    @property
    def sampling_rate_hz(self) -> float:
        return self.epochs[0].sampling_rate_hz if self.epochs else 0.0

    @property
    def n_samples(self) -> int:
        return self.epochs[0].n_samples if self.epochs else 0

    def labels(self) -> np.ndarray:
        return np.array([ep.label for ep in self.epochs], dtype=np.int64)

    def trial_indices(self) -> np.ndarray:
        return np.array([ep.trial_index for ep in self.epochs], dtype=np.int64)

    def stack(self) -> np.ndarray:
        """Return all epochs as one (n_trials, n_channels, n_samples) array."""
        if not self.epochs:
            return np.zeros((0, len(self.channel_names), 0), dtype=np.float64)
        return np.stack([ep.data for ep in self.epochs])

    def subset(self, indices) -> "EpochSet":
        indices = np.asarray(indices, dtype=np.int64)
        return EpochSet(tuple(self.epochs[i] for i in indices), self.channel_names)

    @classmethod
    def from_arrays(cls, X, labels, channel_names, sampling_rate_hz,
                    trial_indices=None) -> "EpochSet":
        X = np.asarray(X, dtype=np.float64)
        labels = check_labels(labels, n=X.shape[0])
        if trial_indices is None:
            trial_indices = np.arange(X.shape[0])
        epochs = tuple(
            Epoch(X[i], int(labels[i]), int(trial_indices[i]), float(sampling_rate_hz))
            for i in range(X.shape[0])
        )
        return cls(epochs, tuple(channel_names))


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse manifest {path}: {exc}") from exc
    return DatasetManifest.from_dict(payload)


def save_manifest(manifest: DatasetManifest, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def load_dataset(manifest_path) -> ContinuousRecording:
    """Load a recording from its manifest and raw float64 data file."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    if not manifest.data_file:
        raise DataError(f"manifest {manifest_path} does not reference a data file")
    data_path = Path(manifest.data_file)
    if not data_path.is_absolute():
        data_path = manifest_path.parent / data_path
    if not data_path.is_file():
        raise DataError(f"data file not found: {data_path}")
    size = data_path.stat().st_size
    row_bytes = manifest.n_channels * 8
    if size == 0 or size % row_bytes != 0:
        raise DataError(
            f"data file size {size} is not a multiple of "
            f"{manifest.n_channels} channels x 8 bytes"
        )
    n_samples = size // row_bytes
    samples = np.fromfile(data_path, dtype="<f8").reshape(manifest.n_channels, n_samples)
    return ContinuousRecording(manifest=manifest, samples=samples)


def write_recording(rec: ContinuousRecording, manifest_path) -> Path:
    """Write a recording as manifest + raw data file next to each other."""
    manifest_path = Path(manifest_path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    data_name = manifest_path.stem + ".f64"
    np.ascontiguousarray(rec.samples, dtype="<f8").tofile(manifest_path.parent / data_name)
    manifest = DatasetManifest(
        name=rec.manifest.name,
        sampling_rate_hz=rec.manifest.sampling_rate_hz,
        channel_names=rec.manifest.channel_names,
        data_file=data_name,
        markers=rec.manifest.markers,
    )
    return save_manifest(manifest, manifest_path)


def extract_epochs(rec: ContinuousRecording, window_start_s: float,
                   window_end_s: float) -> EpochSet:
    """Cut one fixed-length, cue-aligned epoch per marker.

    The epoch covers ``[onset + start, onset + end)`` in seconds relative to
    the marker onset; its length is ``round((end - start) * fs)`` samples.
    """
    if not window_end_s > window_start_s:
        raise ConfigError(
            f"window end ({window_end_s}) must exceed window start ({window_start_s})"
        )
    fs = rec.manifest.sampling_rate_hz
    length = int(round((window_end_s - window_start_s) * fs))
    if length < 2:
        raise ConfigError(f"window of {length} samples is too short")
    offset = int(round(window_start_s * fs))
    epochs = []
    for i, (onset, label) in enumerate(rec.manifest.markers):
        start = onset + offset
        stop = start + length
        if start < 0 or stop > rec.n_samples:
            raise DataError(
                f"trial {i} (onset {onset}) window [{start}, {stop}) exceeds "
                f"recording bounds [0, {rec.n_samples})"
            )
        epochs.append(Epoch(rec.samples[:, start:stop].copy(), label, i, fs))
    return EpochSet(tuple(epochs), rec.manifest.channel_names)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a two-class recording with class-specific variance boosts.

    Class-1 trials get their variance multiplied by ``boost`` on
    ``class1_channels``; class-2 trials on ``class2_channels``. Everything
    else is white noise with standard deviation ``noise_std``.
    """

    n_channels: int
    n_trials_per_class: int
    epoch_samples: int
    sampling_rate_hz: float
    class1_channels: tuple[int, ...]
    class2_channels: tuple[int, ...]
    boost: float = 5.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class1_channels", tuple(int(i) for i in self.class1_channels))
        object.__setattr__(self, "class2_channels", tuple(int(i) for i in self.class2_channels))
        if self.n_channels < 1:
            raise ConfigError("n_channels must be at least 1")
        if self.n_trials_per_class < 1:
            raise ConfigError("n_trials_per_class must be at least 1")
        if self.epoch_samples < 2:
            raise ConfigError("epoch_samples must be at least 2")
        if not self.sampling_rate_hz > 0:
            raise ConfigError("sampling_rate_hz must be positive")
        if not self.noise_std > 0:
            raise ConfigError("noise_std must be positive")
        if not self.boost > 0:
            raise ConfigError("boost must be positive")
        for name, idx in (("class1_channels", self.class1_channels),
                          ("class2_channels", self.class2_channels)):
            if any(i < 0 or i >= self.n_channels for i in idx):
                raise ConfigError(f"{name} indices must lie in [0, {self.n_channels})")
            if len(set(idx)) != len(idx):
                raise ConfigError(f"{name} contains repeated indices")
        if set(self.class1_channels) & set(self.class2_channels):
            warnings.warn("class1_channels and class2_channels overlap", stacklevel=2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class1_channels"] = list(self.class1_channels)
        d["class2_channels"] = list(self.class2_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"invalid synthetic spec: {exc}") from exc

    @classmethod
    def from_file(cls, path) -> "SyntheticSpec":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"synthetic spec not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse synthetic spec {path}: {exc}") from exc


def generate_synthetic(spec: SyntheticSpec) -> ContinuousRecording:
    """Generate a deterministic labeled recording from a synthetic spec.

    Trials are laid back to back, one marker per trial at its first sample,
    so extraction with window ``[0, epoch_samples / fs]`` recovers them
    exactly. Class labels are balanced and shuffled under the spec seed.
    """
    rng = np.random.default_rng(spec.seed)
    n_trials = 2 * spec.n_trials_per_class
    labels = rng.permutation(
        np.array([1] * spec.n_trials_per_class + [2] * spec.n_trials_per_class)
    )
    total = n_trials * spec.epoch_samples
    samples = rng.standard_normal((spec.n_channels, total)) * spec.noise_std
    scale = float(np.sqrt(spec.boost))
    for t, label in enumerate(labels):
        rows = spec.class1_channels if label == 1 else spec.class2_channels
        if rows:
            sl = slice(t * spec.epoch_samples, (t + 1) * spec.epoch_samples)
            samples[list(rows), sl] *= scale
    markers = tuple(
        (t * spec.epoch_samples, int(labels[t])) for t in range(n_trials)
    )
    manifest = DatasetManifest(
        name=f"synthetic-seed{spec.seed}",
        sampling_rate_hz=spec.sampling_rate_hz,
        channel_names=tuple(f"ch{i:03d}" for i in range(spec.n_channels)),
        data_file=None,
        markers=markers,
    )
    return ContinuousRecording(manifest=manifest, samples=samples)


def persist_epochs(epoch_set: EpochSet, path) -> Path:
    """Write an epoch set to the versioned binary container (bit-exact)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(epoch_set)
    n_ch = len(epoch_set.channel_names)
    n_samp = epoch_set.n_samples
    fs = epoch_set.sampling_rate_hz
    with open(path, "wb") as fh:
        fh.write(EPOCHS_MAGIC)
        fh.write(struct.pack("<B", EPOCHS_VERSION))
        fh.write(struct.pack("<III", n, n_ch, n_samp))
        fh.write(struct.pack("<d", fs))
        for name in epoch_set.channel_names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        for ep in epoch_set.epochs:
            fh.write(struct.pack("<iq", ep.label, ep.trial_index))
        if n:
            np.ascontiguousarray(epoch_set.stack(), dtype="<f8").tofile(fh)
    return path


def read_epochs(path) -> EpochSet:
    """Read an epoch set written by :func:`persist_epochs`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"epoch file not found: {path}")
    blob = path.read_bytes()

    def take(offset: int, count: int) -> tuple[bytes, int]:
        if offset + count > len(blob):
            raise DataError(f"truncated epoch file: {path}")
        return blob[offset:offset + count], offset + count

    chunk, pos = take(0, len(EPOCHS_MAGIC))
    if chunk != EPOCHS_MAGIC:
        raise DataError(f"corrupt header in {path}: bad magic")
    chunk, pos = take(pos, 1)
    version = chunk[0]
    if version != EPOCHS_VERSION:
        raise DataError(f"unsupported epoch file version {version}")
    chunk, pos = take(pos, 12)
    n, n_ch, n_samp = struct.unpack("<III", chunk)
    chunk, pos = take(pos, 8)
    fs = struct.unpack("<d", chunk)[0]
    names = []
    for _ in range(n_ch):
        chunk, pos = take(pos, 2)
        (ln,) = struct.unpack("<H", chunk)
        chunk, pos = take(pos, ln)
        names.append(chunk.decode("utf-8"))
    meta = []
    for _ in range(n):
        chunk, pos = take(pos, 12)
        meta.append(struct.unpack("<iq", chunk))
    payload_bytes = n * n_ch * n_samp * 8
    chunk, pos = take(pos, payload_bytes)
    if pos != len(blob):
        raise DataError(f"trailing bytes in epoch file {path}")
    if n == 0:
        return EpochSet((), tuple(names))
    data = np.frombuffer(chunk, dtype="<f8").reshape(n, n_ch, n_samp)
    epochs = tuple(
        Epoch(data[i].copy(), int(meta[i][0]), int(meta[i][1]), fs) for i in range(n)
    )
    return EpochSet(epochs, tuple(names))
