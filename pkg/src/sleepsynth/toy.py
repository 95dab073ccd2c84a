"""Deterministic toy benchmark recording.

A desk-scale stand-in for real recordings: per-class blocks of 5 s epochs
at 100 Hz whose EEG carries the class's spectral signature (2 Hz tone for
NREM, 6 Hz for REM, broadband noise for WAKE) and whose EMG amplitude
encodes the wake/sleep split. Block structure keeps same-class epochs
temporally contiguous so the windowing stage finds runs long enough for
the 500-sample horizon. All amplitudes here are benchmark choices.
"""

from __future__ import annotations

import numpy as np

from .signals import (DEFAULT_EPOCH_SECONDS, DEFAULT_SAMPLE_RATE, ClassLabel,
                      Signal)

NREM_TONE_HZ = 2.0
REM_TONE_HZ = 6.0
EMG_TONE_HZ = 30.0
WAKE_EMG_FACTOR = 3.0
BLOCK_ORDER = (ClassLabel.WAKE, ClassLabel.NREM, ClassLabel.REM)


def make_toy_dataset(epochs_per_class: int, noise_sigma: float,
                     seed: int) -> tuple[Signal, Signal, list[ClassLabel]]:
    """Build paired EEG/EMG channels plus ground-truth epoch labels.

    Sleep EEG tones are phase-continuous across a block, so concatenated
    same-class runs are smooth; WAKE EEG is unit-variance white noise.
    The EMG is a 30 Hz tone whose RMS triples during WAKE blocks. With
    noise_sigma = 0 the channels are noise-free except for the WAKE EEG,
    which is noise by definition.
    """
    if epochs_per_class < 1:
        raise ValueError("epochs_per_class must be >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    rate = DEFAULT_SAMPLE_RATE
    epoch_len = int(DEFAULT_EPOCH_SECONDS * rate)
    block_len = epochs_per_class * epoch_len
    total = len(BLOCK_ORDER) * block_len
    t = np.arange(total) / rate

    eeg = np.zeros(total)
    emg = np.zeros(total)
    labels: list[ClassLabel] = []
    for b, label in enumerate(BLOCK_ORDER):
        sl = slice(b * block_len, (b + 1) * block_len)
        if label is ClassLabel.NREM:
            eeg[sl] = np.sin(2.0 * np.pi * NREM_TONE_HZ * t[sl])
        elif label is ClassLabel.REM:
            eeg[sl] = np.sin(2.0 * np.pi * REM_TONE_HZ * t[sl])
        else:
            eeg[sl] = rng.standard_normal(block_len)
        emg_amp = WAKE_EMG_FACTOR if label is ClassLabel.WAKE else 1.0
        emg[sl] = emg_amp * np.sin(2.0 * np.pi * EMG_TONE_HZ * t[sl])
        labels.extend([label] * epochs_per_class)
    if noise_sigma > 0:
        sleep = np.ones(total, dtype=bool)
        sleep[:block_len] = False  # WAKE EEG is already pure noise
        eeg[sleep] += noise_sigma * rng.standard_normal(int(sleep.sum()))
        emg += noise_sigma * rng.standard_normal(total)
    return Signal(eeg, rate), Signal(emg, rate), labels
