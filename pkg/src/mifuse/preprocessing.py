"""Band-pass filtering and binary spatial weighting into brain-region groups.

Filtering uses a maximally flat IIR band-pass applied forward-backward
(zero phase) with reflective edge padding. Spatial weighting keeps only the
channels named by a montage and slices them into named region groups; rows
outside every group carry weight zero and are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, TransformerMixin

from .dataset import Epoch, EpochSet
from .errors import ConfigError, DataError, NumericalError
from .validation import as_epoch_array


@dataclass(frozen=True)
class FilterCoeffs:
    """Transfer-function coefficients of a designed band-pass filter."""

    numerator: tuple[float, ...]
    denominator: tuple[float, ...]
    low_hz: float
    high_hz: float
    order: int
    fs: float

    def __post_init__(self):
        den = np.asarray(self.denominator, dtype=np.float64)
        if den.size == 0 or abs(den[0] - 1.0) > 1e-12:
            raise NumericalError("denominator must be monic")
        poles = np.roots(den)
        if poles.size and np.max(np.abs(poles)) >= 1.0:
            raise NumericalError(
                f"unstable filter design (pole magnitude {np.max(np.abs(poles)):.6f})"
            )

    @property
    def pad_length(self) -> int:
        ncoef = max(len(self.numerator), len(self.denominator))
        return 3 * (ncoef - 1)

    def response_at(self, freq_hz: float) -> complex:
        """Evaluate the transfer function on the unit circle at ``freq_hz``."""
        z = np.exp(1j * 2.0 * np.pi * freq_hz / self.fs)
        return complex(
            np.polyval(self.numerator, z) / np.polyval(self.denominator, z)
        )


def design_bandpass(low_hz: float, high_hz: float, fs: float, order: int = 4) -> FilterCoeffs:
    """Design a maximally flat IIR band-pass filter.

    Parameters
    ----------
    low_hz, high_hz : float
        Pass-band edges; must satisfy ``0 < low < high < fs / 2``.
    fs : float
        Sampling rate in Hz.
    order : int
        Design order per band edge (the realized filter order is twice this).
    """
    if not fs > 0:
        raise ConfigError("sampling rate must be positive")
    if order < 1:
        raise ConfigError("filter order must be at least 1")
    if not (0 < low_hz < high_hz < fs / 2):
        raise ConfigError(
            f"band edges ({low_hz}, {high_hz}) must satisfy 0 < low < high < fs/2 = {fs / 2}"
        )
    b, a = signal.butter(order, [low_hz, high_hz], btype="band", fs=fs)
    return FilterCoeffs(
        numerator=tuple(float(v) for v in b),
        denominator=tuple(float(v) for v in a),
        low_hz=float(low_hz),
        high_hz=float(high_hz),
        order=int(order),
        fs=float(fs),
    )


def filter_array(X: np.ndarray, coeffs: FilterCoeffs) -> np.ndarray:
    """Apply the filter forward-backward along the last axis."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] <= coeffs.pad_length:
        raise DataError(
            f"signal of {X.shape[-1]} samples is too short for edge padding "
            f"({coeffs.pad_length} samples)"
        )
    return signal.filtfilt(
        coeffs.numerator, coeffs.denominator, X,
        axis=-1, padtype="even", padlen=coeffs.pad_length,
    )


def filter_epoch(epoch: Epoch, coeffs: FilterCoeffs) -> Epoch:
    """Zero-phase band-pass one epoch, channel by channel."""
    return Epoch(
        data=filter_array(epoch.data, coeffs),
        label=epoch.label,
        trial_index=epoch.trial_index,
        sampling_rate_hz=epoch.sampling_rate_hz,
    )


def filter_epoch_set(epoch_set: EpochSet, coeffs: FilterCoeffs) -> EpochSet:
    return EpochSet(
        tuple(filter_epoch(ep, coeffs) for ep in epoch_set.epochs),
        epoch_set.channel_names,
    )


class BandpassFilter(BaseEstimator, TransformerMixin):
    """Stateless zero-phase band-pass transformer over epoch arrays."""

    def __init__(self, low_hz: float = 8.0, high_hz: float = 30.0,
                 order: int = 4, fs: float = 100.0):
        self.low_hz = low_hz
        self.high_hz = high_hz
        self.order = order
        self.fs = fs

    def fit(self, X=None, y=None):
        self.coeffs_ = design_bandpass(self.low_hz, self.high_hz, self.fs, self.order)
        return self

    def transform(self, X):
        X = as_epoch_array(X)
        return filter_array(X, self.coeffs_)


@dataclass(frozen=True)
class ChannelGroups:
    """Named, pairwise-disjoint channel index groups over a full montage.

    Equivalent to a diagonal 0/1 weighting of the channel axis followed by
    slicing: a channel carries weight 1 iff it appears in some group.
    """

    groups: tuple[tuple[str, tuple[int, ...]], ...]
    total_channels: int

    def __post_init__(self):
        norm = tuple((str(name), tuple(int(i) for i in idx)) for name, idx in self.groups)
        object.__setattr__(self, "groups", norm)
        if not norm:
            raise ConfigError("at least one channel group is required")
        seen: set[int] = set()
        names: set[str] = set()
        for name, idx in norm:
            if name in names:
                raise ConfigError(f"duplicate group name {name!r}")
            names.add(name)
            if not idx:
                raise ConfigError(f"group {name!r} is empty")
            if len(set(idx)) != len(idx):
                raise ConfigError(f"group {name!r} repeats a channel index")
            for i in idx:
                if i < 0 or i >= self.total_channels:
                    raise ConfigError(
                        f"group {name!r} index {i} outside [0, {self.total_channels})"
                    )
                if i in seen:
                    raise ConfigError(f"channel index {i} appears in more than one group")
                seen.add(i)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(idx) for _, idx in self.groups)

    def indices(self, name: str) -> tuple[int, ...]:
        for gname, idx in self.groups:
            if gname == name:
                return idx
        raise KeyError(name)

    def weights(self) -> np.ndarray:
        """The binary channel weights implied by the grouping."""
        w = np.zeros(self.total_channels, dtype=np.float64)
        for _, idx in self.groups:
            w[list(idx)] = 1.0
        return w

    @classmethod
    def contiguous(cls, total_channels: int, n_groups: int = 2,
                   prefix: str = "group") -> "ChannelGroups":
        """Split the channel range into equal contiguous groups (testing aid)."""
        if total_channels % n_groups != 0:
            raise ConfigError(
                f"{total_channels} channels cannot split into {n_groups} equal groups"
            )
        size = total_channels // n_groups
        groups = tuple(
            (f"{prefix}_{g + 1}", tuple(range(g * size, (g + 1) * size)))
            for g in range(n_groups)
        )
        return cls(groups=groups, total_channels=total_channels)


@dataclass(frozen=True)
class GroupedEpoch:
    """Per-region slices of one epoch, in montage order."""

    region_names: tuple[str, ...]
    blocks: tuple[np.ndarray, ...]
    label: int
    trial_index: int

    def block(self, name: str) -> np.ndarray:
        return self.blocks[self.region_names.index(name)]


def apply_spatial_weighting(epoch: Epoch, groups: ChannelGroups) -> GroupedEpoch:
    """Drop zero-weight channels and slice the rest into region blocks.

    Within-group channel order is preserved; values pass through unchanged.
    """
    if epoch.n_channels != groups.total_channels:
        raise DataError(
            f"epoch has {epoch.n_channels} channels, groups expect {groups.total_channels}"
        )
    blocks = tuple(epoch.data[list(idx), :].copy() for _, idx in groups.groups)
    return GroupedEpoch(
        region_names=groups.names,
        blocks=blocks,
        label=epoch.label,
        trial_index=epoch.trial_index,
    )


def group_epoch_array(X: np.ndarray, groups: ChannelGroups) -> dict[str, np.ndarray]:
    """Region-slice a (n_trials, n_channels, n_samples) array."""
    X = as_epoch_array(X)
    if X.shape[1] != groups.total_channels:
        raise DataError(
            f"epoch array has {X.shape[1]} channels, groups expect {groups.total_channels}"
        )
    return {name: X[:, list(idx), :] for name, idx in groups.groups}


def load_montage(path, channel_names) -> ChannelGroups:
    """Parse a montage file and resolve its channel names against a manifest.

    Format: one ``region: NAME, NAME, ...`` line per group; ``#`` starts a
    comment. Resolution is exact (case-sensitive) against ``channel_names``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"montage file not found: {path}")
    lookup = {name: i for i, name in enumerate(channel_names)}
    groups: list[tuple[str, tuple[int, ...]]] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'region: ch1, ch2, ...'")
        region, rest = line.split(":", 1)
        wanted = [tok.strip() for tok in rest.split(",") if tok.strip()]
        unknown = [w for w in wanted if w not in lookup]
        if unknown:
            raise ConfigError(
                f"{path}:{lineno}: channels not present in recording: {', '.join(unknown)}"
            )
        groups.append((region.strip(), tuple(lookup[w] for w in wanted)))
    return ChannelGroups(groups=tuple(groups), total_channels=len(channel_names))


def write_montage(path, groups: ChannelGroups, channel_names) -> Path:
    """Write a montage file naming each group's channels."""
    path = Path(path)
    lines = []
    for name, idx in groups.groups:
        lines.append(f"{name}: " + ", ".join(channel_names[i] for i in idx))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def default_montage_path(n_channels: int) -> Path:
    """Packaged montage asset for the 118- and 59-channel layouts.

    The electrode lists are reconstructions over the left and right motor
    cortices, shipped as editable text assets, not ground truth.
    """
    here = Path(__file__).parent / "montages"
    if n_channels == 118:
        return here / "motor_118.txt"
    if n_channels == 59:
        return here / "motor_59.txt"
    raise ConfigError(f"no packaged montage for {n_channels} channels")
