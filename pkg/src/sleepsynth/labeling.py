"""Two-stage sleep-stage labeling.

Stage 1 separates WAKE from SLEEP by comparing per-epoch EMG RMS against
a threshold derived from the whole recording; stage 2 separates NREM from
REM by comparing bandwidth-normalized EEG power in the delta band against
the theta band.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .signals import ClassLabel, Dataset, LabeledEpoch, Signal, rms, segment_epochs


@dataclass(frozen=True)
class FrequencyBand:
    low: float
    high: float

    def __post_init__(self) -> None:
        if not (0 <= self.low < self.high):
            raise ValueError(f"need 0 <= low < high, got [{self.low}, {self.high})")

    @property
    def width(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class LabelingConfig:
    """Bands and threshold factor for the two-stage rule."""

    delta: FrequencyBand = field(default_factory=lambda: FrequencyBand(0.5, 4.0))
    theta: FrequencyBand = field(default_factory=lambda: FrequencyBand(4.0, 8.0))
    emg_threshold_factor: float = 1.5

    def __post_init__(self) -> None:
        if self.emg_threshold_factor <= 0:
            raise ValueError("emg_threshold_factor must be positive")
        if self.delta.high > self.theta.low:
            raise ValueError("delta and theta bands may only touch at their boundary")


class WakeState(enum.Enum):
    """Stage-1 outcome; SLEEP epochs proceed to stage 2."""

    WAKE = "WAKE"
    SLEEP = "SLEEP"


def periodogram(signal: Signal) -> tuple[np.ndarray, np.ndarray]:
    """One-sided periodogram normalized so the bin sum equals the mean square.

    Interior bins carry the doubled weight of the real DFT; the DC bin and
    (for even lengths) the Nyquist bin are counted once.
    """
    x = signal.samples
    n = len(x)
    spectrum = np.fft.rfft(x)
    power = np.abs(spectrum) ** 2 / (n * n)
    weights = np.full(power.shape, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    freqs = np.fft.rfftfreq(n, d=1.0 / signal.sample_rate)
    return freqs, power * weights


def band_power(signal: Signal, band: FrequencyBand) -> float:
    """Total periodogram power falling in [low, high).

    Bin membership is half-open so adjacent bands never double-count a
    bin; as the sole exception, a band whose upper edge equals the Nyquist
    frequency includes the Nyquist bin, so bands partitioning
    [0, Nyquist] capture the full mean-square power (Parseval).
    """
    if band.high > signal.nyquist:
        raise ValueError(
            f"band [{band.low}, {band.high}) exceeds Nyquist {signal.nyquist} Hz")
    freqs, power = periodogram(signal)
    mask = (freqs >= band.low) & (freqs < band.high)
    if band.high == signal.nyquist:
        mask |= freqs == band.high
    return float(power[mask].sum())


def compute_emg_baseline(emg_epochs: list[Signal]) -> float:
    """Median of per-epoch RMS amplitudes over a recording."""
    if not emg_epochs:
        raise ValueError("cannot compute an EMG baseline from zero epochs")
    return float(np.median([rms(e.samples) for e in emg_epochs]))


def classify_wake_sleep(emg_epoch: Signal, baseline: float,
                        config: LabelingConfig) -> WakeState:
    """WAKE iff epoch RMS strictly exceeds factor * baseline."""
    if baseline <= 0:
        raise ValueError("baseline must be positive")
    if rms(emg_epoch.samples) > config.emg_threshold_factor * baseline:
        return WakeState.WAKE
    return WakeState.SLEEP


def classify_nrem_rem(eeg_epoch: Signal, config: LabelingConfig) -> ClassLabel:
    """NREM iff bandwidth-normalized delta power >= normalized theta power.

    Normalizing by band width keeps the wider theta band from winning on
    broadband noise; ties go to NREM.
    """
    if eeg_epoch.sample_rate < 16:
        raise ValueError("sample rate must be >= 16 Hz so the theta band is below Nyquist")
    delta = band_power(eeg_epoch, config.delta) / config.delta.width
    theta = band_power(eeg_epoch, config.theta) / config.theta.width
    return ClassLabel.NREM if delta >= theta else ClassLabel.REM


def label_epoch(eeg_epoch: Signal, emg_epoch: Signal, baseline: float,
                config: LabelingConfig) -> ClassLabel:
    if classify_wake_sleep(emg_epoch, baseline, config) is WakeState.WAKE:
        return ClassLabel.WAKE
    return classify_nrem_rem(eeg_epoch, config)


def label_dataset(eeg: Signal, emg: Signal, epoch_seconds: float,
                  config: LabelingConfig, subject_id: str = "recording") -> Dataset:
    """Segment paired EEG/EMG channels and label every epoch.

    The output carries the EEG epochs only; the EMG channel is consumed by
    the stage-1 threshold.
    """
    if len(eeg) != len(emg) or eeg.sample_rate != emg.sample_rate:
        raise ValueError("EEG and EMG channels must have equal length and rate")
    eeg_epochs = segment_epochs(eeg, epoch_seconds)
    emg_epochs = segment_epochs(emg, epoch_seconds)
    if not eeg_epochs:
        return Dataset([])
    baseline = compute_emg_baseline(emg_epochs)
    labeled = [
        LabeledEpoch(signal=eeg_ep, label=label_epoch(eeg_ep, emg_ep, baseline, config),
                     subject_id=subject_id, epoch_index=i)
        for i, (eeg_ep, emg_ep) in enumerate(zip(eeg_epochs, emg_epochs))
    ]
    return Dataset(labeled)
