"""The original / synthetic / combined evaluation protocol.

A stratified split fixes one original test set; classifiers are trained
under three conditions (original only, synthetic only, their union) and
always evaluated on the original test split. Synthetic training data must
trace back to training-split epochs only; anything else is rejected as
leakage. Grid cells are seeded by a stable hash of their coordinates so
partial re-runs agree with full runs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .classifier import (ClassifierSpec, ClassifierTrainConfig, predict_labels,
                         train_classifier)
from .features import STFTConfig, epoch_spectrogram, fit_norm_stats, standardize
from .forecasters import ForecasterSpec, TrainConfig, train_class_forecaster
from .generator import SyntheticDataset, synthesize_dataset
from .seeding import stable_seed
from .signals import CLASS_INDEX, CLASS_ORDER, ClassLabel, Dataset, LabeledEpoch
from .windowing import WindowConfig, build_class_streams, build_pairs


class Condition(enum.Enum):
    """Classifier training condition; the test split is always original."""

    O = "O"
    S = "S"
    OS = "OS"


class LeakageError(ValueError):
    """Synthetic training data references an epoch outside the training split."""


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    stratified: bool = True
    split_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted, in CLASS_ORDER."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.counts, dtype=np.int64)
        c = len(CLASS_ORDER)
        if arr.shape != (c, c) or np.any(arr < 0):
            raise ValueError(f"confusion matrix must be non-negative {c}x{c}")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def true_count(self, label: ClassLabel) -> int:
        return int(self.counts[CLASS_INDEX[label]].sum())

    def to_lists(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


@dataclass(frozen=True, eq=False)
class MetricsResult:
    accuracy: float
    per_class: Mapping[ClassLabel, ClassMetrics]
    confusion: ConfusionMatrix

    def micro_recall(self) -> float:
        return float(np.trace(self.confusion.counts)) / self.confusion.total


@dataclass(frozen=True, eq=False)
class RunReport:
    """Metrics of one (condition, forecaster, window, seed) cell."""

    condition: Condition
    forecaster: str
    window: int
    seed_index: int
    seed: int
    accuracy: float
    per_class: Mapping[ClassLabel, ClassMetrics]
    confusion: ConfusionMatrix

    def to_record(self) -> dict:
        return {
            "condition": self.condition.value,
            "forecaster": self.forecaster,
            "window": self.window,
            "seed_index": self.seed_index,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "per_class": {
                label.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "degenerate": m.degenerate,
                }
                for label, m in self.per_class.items()
            },
            "confusion": self.confusion.to_lists(),
        }


@dataclass(frozen=True)
class AggregateRow:
    forecaster: str
    window: int
    condition: Condition
    mean_accuracy: float
    std_accuracy: float
    n_seeds: int


@dataclass(eq=False)
class GridResult:
    reports: list[RunReport] = field(default_factory=list)
    aggregates: list[AggregateRow] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)


def make_split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified, seeded, disjoint train/test partition.

    Per-class train counts are round(train_fraction * class count),
    clamped so both sides keep at least one epoch of each class.
    """
    counts = dataset.class_counts()
    present = [label for label in CLASS_ORDER if counts[label] > 0]
    for label in present:
        if counts[label] < 2:
            raise ValueError(f"class {label.value} has {counts[label]} epoch(s); "
                             "need >= 2 to split")
    rng = np.random.default_rng(spec.split_seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for label in present:
        members = [i for i, e in enumerate(dataset.epochs) if e.label == label]
        order = rng.permutation(len(members))
        n_train = int(round(spec.train_fraction * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        chosen = {members[j] for j in order[:n_train]}
        train_idx.extend(i for i in members if i in chosen)
        test_idx.extend(i for i in members if i not in chosen)
    train_idx.sort()
    test_idx.sort()
    return (Dataset(dataset.epochs[i] for i in train_idx),
            Dataset(dataset.epochs[i] for i in test_idx))


def assemble_training_set(condition: Condition, orig_train: Dataset,
                          synthetic: SyntheticDataset | None) -> Dataset:
    """Build the classifier training set for one condition.

    Every synthetic epoch must trace back to a training-split epoch;
    provenance pointing anywhere else (in particular at test epochs) is
    rejected as leakage.
    """
    if condition is Condition.O:
        return orig_train
    if synthetic is None:
        raise ValueError(f"condition {condition.value} requires a synthetic dataset")
    train_ids = orig_train.identities()
    for epoch in synthetic:
        source = epoch.provenance.source_identity
        if source is None or source not in train_ids:
            raise LeakageError(
                f"synthetic epoch {epoch.identity} traces to {source}, which is "
                "not in the original training split")
    if condition is Condition.S:
        return synthetic.as_dataset()
    return Dataset(tuple(orig_train.epochs) + tuple(synthetic.epochs))


def compute_metrics(true_labels: Sequence[ClassLabel],
                    predicted_labels: Sequence[ClassLabel]) -> MetricsResult:
    """Accuracy, per-class precision/recall/F1, and the confusion matrix.

    Fractions with a zero denominator are reported as 0 and flagged
    degenerate; F1 is computed as 2TP/(2TP+FP+FN), the harmonic mean of
    precision and recall expressed over integer counts.
    """
    if len(true_labels) == 0:
        raise ValueError("cannot compute metrics on empty label lists")
    if len(true_labels) != len(predicted_labels):
        raise ValueError("label list lengths differ")
    c = len(CLASS_ORDER)
    counts = np.zeros((c, c), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[CLASS_INDEX[t], CLASS_INDEX[p]] += 1
    confusion = ConfusionMatrix(counts)
    accuracy = float(np.trace(counts)) / len(true_labels)
    per_class: dict[ClassLabel, ClassMetrics] = {}
    for label in CLASS_ORDER:
        i = CLASS_INDEX[label]
        tp = int(counts[i, i])
        fp = int(counts[:, i].sum() - tp)
        fn = int(counts[i, :].sum() - tp)
        degenerate = tp + fp == 0 or tp + fn == 0
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
        per_class[label] = ClassMetrics(precision=precision, recall=recall,
                                        f1=f1, degenerate=degenerate)
    return MetricsResult(accuracy=accuracy, per_class=per_class, confusion=confusion)


class _SpectrogramCache:
    """Memoized per-epoch log spectrograms (epochs are immutable)."""

    def __init__(self, config: STFTConfig):
        self.config = config
        self._cache: dict[LabeledEpoch, object] = {}

    def get(self, epoch: LabeledEpoch):
        spec = self._cache.get(epoch)
        if spec is None:
            spec = epoch_spectrogram(epoch.signal, self.config)
            self._cache[epoch] = spec
        return spec


def evaluate_condition(condition: Condition, orig_train: Dataset, test: Dataset,
                       synthetic: SyntheticDataset | None, stft: STFTConfig,
                       classifier_config: ClassifierTrainConfig,
                       conv_channels: tuple[int, ...] = (8, 16),
                       cache: _SpectrogramCache | None = None) -> MetricsResult:
    """Train one classifier under a condition and score it on the test split.

    Standardization statistics are fitted on the condition's training
    spectrograms and reused, unchanged, for the test spectrograms.
    """
    train_set = assemble_training_set(condition, orig_train, synthetic)
    cache = cache or _SpectrogramCache(stft)
    train_specs = [cache.get(e) for e in train_set]
    test_specs = [cache.get(e) for e in test]
    stats = fit_norm_stats(train_specs, fitted_on=f"train:{condition.value}")
    train_std = [standardize(s, stats) for s in train_specs]
    test_std = [standardize(s, stats) for s in test_specs]
    clf_spec = ClassifierSpec(input_shape=train_std[0].shape,
                              conv_channels=conv_channels)
    model = train_classifier(train_std, [e.label for e in train_set],
                             clf_spec, classifier_config)
    predicted = predict_labels(model, test_std)
    return compute_metrics([e.label for e in test], predicted)


def aggregate_reports(reports: Sequence[RunReport]) -> list[AggregateRow]:
    """Mean and sample std of accuracy across seeds, per grid cell."""
    groups: dict[tuple[str, int, Condition], list[float]] = {}
    order: list[tuple[str, int, Condition]] = []
    for r in reports:
        key = (r.forecaster, r.window, r.condition)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r.accuracy)
    rows = []
    for key in order:
        accs = groups[key]
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        rows.append(AggregateRow(forecaster=key[0], window=key[1], condition=key[2],
                                 mean_accuracy=float(np.mean(accs)),
                                 std_accuracy=std, n_seeds=len(accs)))
    return rows


def run_experiment_grid(dataset: Dataset, architectures: Sequence[str],
                        windows: Sequence[int], conditions: Sequence[Condition],
                        n_seeds: int, *, split: SplitSpec,
                        train_config: TrainConfig,
                        classifier_config: ClassifierTrainConfig,
                        stft: STFTConfig, base_seed: int = 0,
                        horizon: int = 500,
                        conv_channels: tuple[int, ...] = (8, 16),
                        hidden_widths: Mapping[str, int] | None = None) -> GridResult:
    """Full factorial run over forecaster x window x condition x seed.

    One stratified split is shared by every cell; forecaster training and
    synthesis are shared across the conditions of a cell. Cell failures
    are recorded without aborting the rest of the grid.
    """
    result = GridResult()
    orig_train, test = make_split(dataset, split)
    target_len = dataset.epoch_length
    streams = build_class_streams(orig_train)
    cache = _SpectrogramCache(stft)
    pairs_by_window: dict[tuple[int, ClassLabel], list] = {}
    for arch in architectures:
        for window in windows:
            for seed_index in range(n_seeds):
                synthetic = None
                synth_error = None
                try:
                    models = {}
                    for label in CLASS_ORDER:
                        key = (window, label)
                        if key not in pairs_by_window:
                            pairs_by_window[key] = build_pairs(
                                streams[label], WindowConfig(window, horizon))
                        spec = ForecasterSpec(
                            architecture=arch, context_len=window, horizon=horizon,
                            hidden_width=(hidden_widths or {}).get(arch))
                        cell_train = TrainConfig(
                            batch_size=train_config.batch_size,
                            max_steps=train_config.max_steps,
                            learning_rate=train_config.learning_rate,
                            huber_delta=train_config.huber_delta,
                            seed=stable_seed(base_seed, "forecaster", arch, window,
                                             seed_index, label.value))
                        models[label] = train_class_forecaster(
                            pairs_by_window[key], spec, cell_train, label)
                    synthetic = synthesize_dataset(
                        models, orig_train, target_len=target_len,
                        seed=stable_seed(base_seed, "synth", arch, window, seed_index))
                except Exception as exc:  # noqa: BLE001 - cell isolation
                    synth_error = f"{type(exc).__name__}: {exc}"
                for condition in conditions:
                    if condition is not Condition.O and synthetic is None:
                        result.errors.append({
                            "forecaster": arch, "window": window,
                            "condition": condition.value, "seed_index": seed_index,
                            "error": synth_error})
                        continue
                    cell_seed = stable_seed(base_seed, "classifier", arch, window,
                                            condition.value, seed_index)
                    try:
                        clf_config = ClassifierTrainConfig(
                            learning_rate=classifier_config.learning_rate,
                            max_epochs=classifier_config.max_epochs,
                            batch_size=classifier_config.batch_size,
                            seed=cell_seed)
                        metrics = evaluate_condition(
                            condition, orig_train, test, synthetic, stft,
                            clf_config, conv_channels, cache)
                        result.reports.append(RunReport(
                            condition=condition, forecaster=arch, window=window,
                            seed_index=seed_index, seed=cell_seed,
                            accuracy=metrics.accuracy, per_class=metrics.per_class,
                            confusion=metrics.confusion))
                    except Exception as exc:  # noqa: BLE001 - cell isolation
                        result.errors.append({
                            "forecaster": arch, "window": window,
                            "condition": condition.value, "seed_index": seed_index,
                            "error": f"{type(exc).__name__}: {exc}"})
    result.aggregates = aggregate_reports(result.reports)
    return result
