"""Recursive sliding-window synthesis of label-paired signals.

Each source epoch seeds one synthetic epoch: the trained forecaster of
the epoch's class repeatedly predicts a chunk of H samples, the context
window slides over its own output, and the accumulated sequence is cut to
the target length. Generation is fully deterministic; the seed argument
is recorded in provenance only.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np

from .forecasters import ForecasterModel
from .signals import (DEFAULT_EPOCH_SAMPLES, ClassLabel, Dataset, LabeledEpoch,
                      Provenance, Signal)


class GenerationDivergedError(RuntimeError):
    """A forecaster produced non-finite values during recursive generation."""

    def __init__(self, step: int, model_id: str):
        super().__init__(f"non-finite prediction at generation step {step} "
                         f"from model {model_id}")
        self.step = step
        self.model_id = model_id


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    """Synthetic epochs paired one-to-one with a source dataset's labels."""

    epochs: tuple[LabeledEpoch, ...]
    source_dataset_id: str
    models: dict[ClassLabel, str]
    generation_seed: int
    skipped: tuple[tuple[str, int], ...] = ()

    def __len__(self) -> int:
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)

    def as_dataset(self) -> Dataset:
        return Dataset(self.epochs)

    def label_multiset(self) -> tuple[int, ...]:
        return self.as_dataset().label_multiset()


def generate_recursive(model: ForecasterModel, initial_context: np.ndarray,
                       target_len: int) -> np.ndarray:
    """Roll a forecaster forward until target_len samples are generated.

    Each step predicts H samples from the current L-sample context, then
    the context becomes the last L samples of context-plus-output. The
    initial context is not part of the output; the final chunk is
    truncated so the result has exactly target_len samples.
    """
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    L = model.spec.context_len
    context = np.asarray(initial_context, dtype=np.float64)
    if context.shape != (L,):
        raise ValueError(f"initial context must have length {L}, got {context.shape}")
    chunks: list[np.ndarray] = []
    generated = 0
    step = 0
    while generated < target_len:
        chunk = model.predict(context)
        if not np.all(np.isfinite(chunk)):
            raise GenerationDivergedError(step=step, model_id=model.model_id)
        chunks.append(chunk)
        generated += chunk.size
        step += 1
        if generated < target_len:
            tail = np.concatenate((context, chunk))
            context = tail[-L:]
    return np.concatenate(chunks)[:target_len]


def _dataset_digest(source: Dataset) -> str:
    ids = sorted(f"{s}:{i}" for s, i in source.identities())
    return hashlib.sha256("|".join(ids).encode("utf-8")).hexdigest()[:16]


def synthesize_dataset(models: dict[ClassLabel, ForecasterModel], source: Dataset,
                       target_len: int = DEFAULT_EPOCH_SAMPLES,
                       seed: int = 0) -> SyntheticDataset:
    """Generate one synthetic epoch per source epoch, labels preserved.

    The initial context is the first L samples of the source epoch, so
    every synthetic sample is conditioned on exactly one real epoch.
    Source epochs shorter than L are skipped with a warning and reported.
    """
    present = {e.label for e in source}
    missing = [label.value for label in sorted(present, key=lambda c: c.value)
               if label not in models]
    if missing:
        raise ValueError(f"no trained model for class(es): {', '.join(missing)}")
    epochs: list[LabeledEpoch] = []
    skipped: list[tuple[str, int]] = []
    for src in source:
        model = models[src.label]
        L = model.spec.context_len
        if len(src.signal) < L:
            warnings.warn(f"skipping epoch {src.identity}: shorter than context "
                          f"length {L}", stacklevel=2)
            skipped.append(src.identity)
            continue
        samples = generate_recursive(model, src.signal.samples[:L], target_len)
        provenance = Provenance.synthetic(model_id=model.model_id,
                                          source_subject=src.subject_id,
                                          source_epoch_index=src.epoch_index,
                                          seed=seed)
        epochs.append(LabeledEpoch(signal=Signal(samples, src.signal.sample_rate),
                                   label=src.label, subject_id=src.subject_id,
                                   epoch_index=src.epoch_index, provenance=provenance))
    return SyntheticDataset(epochs=tuple(epochs), source_dataset_id=_dataset_digest(source),
                            models={label: m.model_id for label, m in models.items()},
                            generation_seed=seed, skipped=tuple(skipped))
