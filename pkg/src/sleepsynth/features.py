"""STFT power spectrograms with log scaling and standardization.

The classifier consumes log(1 + |STFT|^2) matrices standardized with
global scalar statistics fitted on the training split only, so test and
synthetic spectrograms are transformed with the same affine map and no
information leaks from the test split.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .signals import Signal

STAGE_RAW = "raw_power"
STAGE_LOG = "log_scaled"
STAGE_STD = "standardized"


@dataclass(frozen=True)
class STFTConfig:
    window_len: int = 128
    hop: int = 64

    def __post_init__(self) -> None:
        if self.window_len < 2:
            raise ValueError("window_len must be >= 2")
        if self.hop * 2 != self.window_len:
            raise ValueError("hop must be exactly half the window (50% overlap)")

    @property
    def freq_bins(self) -> int:
        return self.window_len // 2 + 1

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.window_len:
            raise ValueError(f"signal of {n_samples} samples is shorter than the "
                             f"{self.window_len}-sample window")
        return (n_samples - self.window_len) // self.hop + 1


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """freq_bins x frames power matrix, tagged with its processing stage."""

    values: np.ndarray
    stage: str

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("spectrogram values must be a 2-D matrix")
        if self.stage not in (STAGE_RAW, STAGE_LOG, STAGE_STD):
            raise ValueError(f"unknown stage {self.stage!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class NormStats:
    """Global scalar standardization statistics, fitted on training data."""

    mean: float
    std: float
    fitted_on: str

    def __post_init__(self) -> None:
        if self.std <= 0:
            raise ValueError("std must be positive")


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window: 0.5*(1 - cos(2*pi*k/(n-1))), zero endpoints."""
    if n < 2:
        raise ValueError("window length must be >= 2")
    k = np.arange(n, dtype=np.float64)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


def stft_power(signal: Signal, config: STFTConfig) -> Spectrogram:
    """Squared-magnitude STFT with a Hann window and no zero padding.

    Frame j covers samples [j*hop, j*hop + window_len); the trailing
    partial frame is dropped.
    """
    frames = config.frame_count(len(signal))
    window = hann_window(config.window_len)
    strided = np.lib.stride_tricks.sliding_window_view(signal.samples,
                                                       config.window_len)
    segments = strided[: (frames - 1) * config.hop + 1 : config.hop]
    spectrum = np.fft.rfft(segments * window, axis=1)
    power = np.abs(spectrum) ** 2
    return Spectrogram(values=power.T, stage=STAGE_RAW)


def stft_freqs(config: STFTConfig, sample_rate: int) -> np.ndarray:
    """Center frequency of each spectrogram row, in Hz."""
    return np.fft.rfftfreq(config.window_len, d=1.0 / sample_rate)


def log_scale(spec: Spectrogram) -> Spectrogram:
    """Elementwise log(1 + S); requires raw power input."""
    if spec.stage != STAGE_RAW:
        raise ValueError(f"log_scale expects stage {STAGE_RAW!r}, got {spec.stage!r}")
    if np.any(spec.values < 0):
        raise ValueError("raw power spectrogram contains negative values")
    return Spectrogram(values=np.log1p(spec.values), stage=STAGE_LOG)


def fit_norm_stats(train_specs: Sequence[Spectrogram],
                   fitted_on: str = "train") -> NormStats:
    """Global scalar mean/std over all elements of the training spectrograms."""
    if not train_specs:
        raise ValueError("cannot fit standardization statistics on zero spectrograms")
    for s in train_specs:
        if s.stage != STAGE_LOG:
            raise ValueError(f"fit expects stage {STAGE_LOG!r}, got {s.stage!r}")
    stacked = np.concatenate([s.values.ravel() for s in train_specs])
    mean = float(stacked.mean())
    std = float(stacked.std())
    if std == 0.0:
        raise ValueError("degenerate constant spectrograms: std is zero")
    return NormStats(mean=mean, std=std, fitted_on=fitted_on)


def standardize(spec: Spectrogram, stats: NormStats) -> Spectrogram:
    """Apply (v - mean)/std with training-split statistics."""
    if spec.stage != STAGE_LOG:
        raise ValueError(f"standardize expects stage {STAGE_LOG!r}, got {spec.stage!r}")
    return Spectrogram(values=(spec.values - stats.mean) / stats.std, stage=STAGE_STD)


def epoch_spectrogram(signal: Signal, config: STFTConfig) -> Spectrogram:
    """Raw STFT power followed by log scaling, the per-epoch feature map."""
    return log_scale(stft_power(signal, config))
