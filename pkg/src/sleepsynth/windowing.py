"""Supervised (context, target) pair construction from same-class runs.

Forecaster training pairs are sliced from maximal contiguous runs of
same-class epochs; a run never spans a label change or a recording
boundary, so no pair mixes classes or subjects.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .signals import CLASS_ORDER, ClassLabel, Dataset

DEFAULT_WINDOW_SWEEP = (10, 25, 50, 100, 250)
DEFAULT_HORIZON = 500


@dataclass(frozen=True)
class WindowConfig:
    context_len: int
    horizon: int = DEFAULT_HORIZON

    def __post_init__(self) -> None:
        if self.context_len < 1 or self.horizon < 1:
            raise ValueError("context_len and horizon must be >= 1")


@dataclass(frozen=True, eq=False)
class WindowPair:
    """One training pair: context of length L, target of the next H samples."""

    context: np.ndarray
    target: np.ndarray


@dataclass(frozen=True, eq=False)
class ClassStream:
    """All maximal contiguous same-class sample runs for one label.

    Runs are ordered by (subject, first epoch index); each run is the
    concatenation of adjacent same-class epochs of one recording.
    """

    label: ClassLabel
    runs: tuple[np.ndarray, ...] = field(default_factory=tuple)

    def total_samples(self) -> int:
        return sum(len(r) for r in self.runs)


def build_class_streams(dataset: Dataset) -> dict[ClassLabel, ClassStream]:
    """Group epochs into contiguous same-class runs, keyed by label.

    Adjacent epochs (same subject, consecutive epoch_index, equal label)
    concatenate into one run; every input sample lands in exactly one run.
    """
    ordered = sorted(dataset.epochs, key=lambda e: (e.subject_id, e.epoch_index))
    runs: dict[ClassLabel, list[np.ndarray]] = {label: [] for label in CLASS_ORDER}
    current: list[np.ndarray] = []
    prev = None
    for epoch in ordered:
        breaks = (prev is None or epoch.subject_id != prev.subject_id
                  or epoch.label != prev.label
                  or epoch.epoch_index != prev.epoch_index + 1)
        if breaks and current:
            runs[prev.label].append(np.concatenate(current))
            current = []
        current.append(epoch.signal.samples)
        prev = epoch
    if current:
        runs[prev.label].append(np.concatenate(current))
    return {label: ClassStream(label=label, runs=tuple(runs[label]))
            for label in CLASS_ORDER}


def pair_count(run_length: int, config: WindowConfig) -> int:
    """Closed-form number of stride-1 pairs a run admits."""
    return max(0, run_length - config.context_len - config.horizon + 1)


def build_pairs(stream: ClassStream, config: WindowConfig) -> list[WindowPair]:
    """Slide a stride-1 window over every run of the stream.

    The pair at offset t covers run[t : t+L] as context and
    run[t+L : t+L+H] as target; runs shorter than L+H contribute nothing.
    Contexts and targets are read-only views into the run buffers.
    """
    L, H = config.context_len, config.horizon
    pairs: list[WindowPair] = []
    for run in stream.runs:
        n = pair_count(len(run), config)
        if n == 0:
            continue
        buf = np.asarray(run, dtype=np.float64)
        buf.setflags(write=False)
        windows = np.lib.stride_tricks.sliding_window_view(buf, L + H)
        for t in range(n):
            w = windows[t]
            pairs.append(WindowPair(context=w[:L], target=w[L:]))
    return pairs
