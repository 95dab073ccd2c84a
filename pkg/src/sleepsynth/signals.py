"""Core signal types, resampling, and epoch segmentation.

All containers are immutable after construction (arrays are marked
read-only) so they can be shared freely across parallel workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_SAMPLE_RATE = 100
DEFAULT_EPOCH_SECONDS = 5.0
DEFAULT_EPOCH_SAMPLES = int(DEFAULT_EPOCH_SECONDS * DEFAULT_SAMPLE_RATE)

# Anti-alias FIR used by resample(): windowed sinc, cutoff at 0.45x the
# target Nyquist, unity DC gain.
ANTIALIAS_TAPS = 64
ANTIALIAS_CUTOFF_FRACTION = 0.45


class ClassLabel(enum.Enum):
    """Sleep stage labels, in fixed iteration order."""

    WAKE = "WAKE"
    NREM = "NREM"
    REM = "REM"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


CLASS_ORDER: tuple[ClassLabel, ...] = (ClassLabel.WAKE, ClassLabel.NREM, ClassLabel.REM)
CLASS_INDEX: dict[ClassLabel, int] = {label: i for i, label in enumerate(CLASS_ORDER)}


def _readonly_f64(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Signal:
    """A uniformly sampled 1-D signal (amplitude in arbitrary units).

    Attributes:
        samples: finite float64 vector, non-empty, read-only.
        sample_rate: sampling rate in Hz, positive integer.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        arr = _readonly_f64(self.samples)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("signal samples must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal samples must be finite (no NaN/Inf)")
        rate = self.sample_rate
        if not isinstance(rate, (int, np.integer)) or rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {rate!r}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Signal duration in seconds."""
        return len(self) / self.sample_rate

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2.0


@dataclass(frozen=True)
class Provenance:
    """Origin of an epoch: measured data or output of a generator model."""

    kind: str  # "original" | "synthetic"
    model_id: str | None = None
    source_subject: str | None = None
    source_epoch_index: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "original":
            if any(v is not None for v in (self.model_id, self.source_subject,
                                           self.source_epoch_index, self.seed)):
                raise ValueError("original provenance carries no generator fields")
        elif self.kind == "synthetic":
            if (self.model_id is None or self.source_subject is None
                    or self.source_epoch_index is None or self.seed is None):
                raise ValueError("synthetic provenance requires model_id, source epoch, and seed")
        else:
            raise ValueError(f"unknown provenance kind {self.kind!r}")

    @property
    def is_original(self) -> bool:
        return self.kind == "original"

    @property
    def source_identity(self) -> tuple[str, int] | None:
        """(subject_id, epoch_index) of the source epoch, if synthetic."""
        if self.is_original:
            return None
        return (self.source_subject, self.source_epoch_index)

    @classmethod
    def original(cls) -> "Provenance":
        return cls(kind="original")

    @classmethod
    def synthetic(cls, model_id: str, source_subject: str,
                  source_epoch_index: int, seed: int) -> "Provenance":
        return cls(kind="synthetic", model_id=model_id, source_subject=source_subject,
                   source_epoch_index=source_epoch_index, seed=seed)


ORIGINAL = Provenance.original()


@dataclass(frozen=True, eq=False)
class LabeledEpoch:
    """A fixed-length signal segment with class label and origin metadata."""

    signal: Signal
    label: ClassLabel
    subject_id: str
    epoch_index: int
    provenance: Provenance = ORIGINAL

    def __post_init__(self) -> None:
        if not isinstance(self.label, ClassLabel):
            raise ValueError(f"label must be a ClassLabel, got {self.label!r}")
        if self.epoch_index < 0:
            raise ValueError("epoch_index must be >= 0")

    @property
    def identity(self) -> tuple[str, int]:
        return (self.subject_id, self.epoch_index)


class Dataset:
    """An ordered, immutable collection of labeled epochs.

    All epochs must share one sample rate and one epoch length; class
    counts in the metadata are recomputed from the epochs themselves.
    """

    def __init__(self, epochs: Iterable[LabeledEpoch]):
        eps = tuple(epochs)
        rates = {e.signal.sample_rate for e in eps}
        if len(rates) > 1:
            raise ValueError(f"epochs mix sample rates: {sorted(rates)}")
        lengths = {len(e.signal) for e in eps}
        if len(lengths) > 1:
            raise ValueError(f"epochs mix lengths: {sorted(lengths)}")
        seen: set[tuple[str, int, str]] = set()
        for e in eps:
            key = (e.subject_id, e.epoch_index, e.provenance.kind)
            if key in seen:
                raise ValueError(f"duplicate epoch index {e.epoch_index} for subject "
                                 f"{e.subject_id!r} ({e.provenance.kind})")
            seen.add(key)
        self._epochs = eps
        self._sample_rate = rates.pop() if rates else None
        self._epoch_length = lengths.pop() if lengths else None

    @property
    def epochs(self) -> tuple[LabeledEpoch, ...]:
        return self._epochs

    @property
    def sample_rate(self) -> int | None:
        return self._sample_rate

    @property
    def epoch_length(self) -> int | None:
        return self._epoch_length

    @property
    def subject_ids(self) -> tuple[str, ...]:
        return tuple(sorted({e.subject_id for e in self._epochs}))

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {label: 0 for label in CLASS_ORDER}
        for e in self._epochs:
            counts[e.label] += 1
        return counts

    def label_multiset(self) -> tuple[int, ...]:
        """Class histogram in CLASS_ORDER, usable for multiset comparison."""
        counts = self.class_counts()
        return tuple(counts[label] for label in CLASS_ORDER)

    def identities(self) -> set[tuple[str, int]]:
        return {e.identity for e in self._epochs}

    def __len__(self) -> int:
        return len(self._epochs)

    def __iter__(self) -> Iterator[LabeledEpoch]:
        return iter(self._epochs)

    def __getitem__(self, i: int) -> LabeledEpoch:
        return self._epochs[i]


def rms(samples: np.ndarray) -> float:
    """Root-mean-square amplitude of a sample vector."""
    arr = np.asarray(samples, dtype=np.float64)
    return float(np.sqrt(np.mean(arr * arr)))


def _antialias_kernel(decimation: int, taps: int = ANTIALIAS_TAPS) -> np.ndarray:
    """Windowed-sinc low-pass with cutoff 0.45x the target Nyquist.

    Cutoff expressed in cycles per input sample; Hann-windowed, normalized
    to unity DC gain.
    """
    cutoff = ANTIALIAS_CUTOFF_FRACTION * 0.5 / decimation
    k = np.arange(taps, dtype=np.float64)
    center = (taps - 1) / 2.0
    t = k - center
    kernel = 2.0 * cutoff * np.sinc(2.0 * cutoff * t)
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (taps - 1)))
    kernel *= window
    return kernel / kernel.sum()


def resample(signal: Signal, target_rate: int) -> Signal:
    """Decimate a signal to an integer-divisor rate with anti-alias filtering.

    Only integer decimation is supported; the output has exactly
    floor(len * target_rate / sample_rate) samples. The low-pass has unity
    DC gain, so constant signals are preserved.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if signal.sample_rate % target_rate != 0:
        raise ValueError(
            f"non-integer decimation ratio: {signal.sample_rate} Hz -> {target_rate} Hz")
    factor = signal.sample_rate // target_rate
    if factor == 1:
        return Signal(signal.samples, target_rate)
    x = signal.samples
    taps = ANTIALIAS_TAPS
    # Edge padding keeps DC exactly flat at the boundaries.
    padded = np.pad(x, (taps // 2, taps - taps // 2 - 1), mode="edge")
    filtered = np.convolve(padded, _antialias_kernel(factor), mode="valid")
    out_len = len(x) // factor
    return Signal(filtered[: out_len * factor : factor], target_rate)


def epoch_sample_count(epoch_seconds: float, sample_rate: int) -> int:
    """Samples per epoch; epoch_seconds * sample_rate must be a positive integer."""
    exact = epoch_seconds * sample_rate
    n = round(exact)
    if n <= 0 or abs(exact - n) > 1e-9:
        raise ValueError(
            f"epoch_seconds * sample_rate must be a positive integer, got {exact}")
    return int(n)


def segment_epochs(signal: Signal, epoch_seconds: float) -> list[Signal]:
    """Split a signal into consecutive non-overlapping fixed-length segments.

    The trailing partial segment is discarded; an epoch longer than the
    signal yields an empty list.
    """
    n_per = epoch_sample_count(epoch_seconds, signal.sample_rate)
    count = len(signal) // n_per
    return [Signal(signal.samples[i * n_per : (i + 1) * n_per], signal.sample_rate)
            for i in range(count)]
