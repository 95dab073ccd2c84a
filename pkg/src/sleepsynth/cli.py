"""Command-line pipeline: label, train-forecasters, synthesize, evaluate, demo.

Each subcommand reads the pipeline config (plus narrowing flags), works
inside a single artifact directory, and exits 0 on success or a distinct
nonzero code with a one-line machine-parseable error:

    2  bad usage / unknown flag (argparse)
    3  unreadable or invalid config
    4  missing upstream artifact
    5  invalid or inconsistent data (bad records, mixed config hashes)
    1  unexpected internal failure

All artifacts carry the hash of the producing config in a .meta.json
sidecar; `evaluate` refuses inputs whose hashes disagree with its own.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import io
from .classifier import ClassifierTrainConfig
from .config import PipelineConfig, ToyConfig, load_config
from .evaluation import (Condition, SplitSpec, aggregate_reports,
                         evaluate_condition, make_split, RunReport,
                         _SpectrogramCache)
from .forecasters import ForecasterSpec, TrainConfig, train_class_forecaster
from .generator import synthesize_dataset
from .labeling import label_dataset
from .seeding import stable_seed
from .signals import CLASS_ORDER, Dataset, resample
from .toy import make_toy_dataset
from .windowing import WindowConfig, build_class_streams, build_pairs

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4
EXIT_DATA = 5


class CliError(Exception):
    def __init__(self, code: int, category: str, message: str):
        super().__init__(message)
        self.code = code
        self.category = category


def _resolve_config(args) -> PipelineConfig:
    cached = getattr(args, "_resolved_config", None)
    if cached is not None:
        return cached
    try:
        if getattr(args, "config", None):
            config = load_config(args.config)
        else:
            config = PipelineConfig()
    except (FileNotFoundError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, "config", str(exc)) from exc
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    return config


def _narrow(values: tuple, flag_value, what: str) -> tuple:
    if flag_value is None:
        return values
    if flag_value not in values:
        raise CliError(EXIT_USAGE, "usage",
                       f"{what} {flag_value!r} is not in the config's list {values}")
    return (flag_value,)


def _workdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset_path(workdir: Path) -> Path:
    return workdir / "dataset.ndjson"


def _model_stem(workdir: Path, arch: str, window: int, seed_index: int,
                label) -> Path:
    return (workdir / "models"
            / f"{arch}_L{window}_seed{seed_index}_{label.value}")


def _synthetic_path(workdir: Path, arch: str, window: int, seed_index: int) -> Path:
    return workdir / "synthetic" / f"{arch}_L{window}_seed{seed_index}.ndjson"


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise CliError(EXIT_MISSING, "missing-artifact", f"{what} not found: {path}")
    return path


def _check_hash(path: Path, expected: str) -> None:
    try:
        meta = io.read_meta(path)
    except FileNotFoundError as exc:
        raise CliError(EXIT_MISSING, "missing-artifact", str(exc)) from exc
    found = meta.get("config_hash")
    if found != expected:
        raise CliError(EXIT_DATA, "config-hash-mismatch",
                       f"{path} was produced under config {found}, "
                       f"current config is {expected}")


def _load_dataset_checked(workdir: Path, config_hash: str) -> Dataset:
    path = _require(_dataset_path(workdir), "labeled dataset")
    _check_hash(path, config_hash)
    try:
        return io.load_dataset(path)
    except ValueError as exc:
        raise CliError(EXIT_DATA, "bad-data", str(exc)) from exc


def _write_config(workdir: Path, config: PipelineConfig) -> None:
    io.atomic_write_text(workdir / "config.json", config.to_json() + "\n")
    io.write_meta(workdir / "config.json", config.config_hash(), "config")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_label(args) -> int:
    config = _resolve_config(args)
    workdir = _workdir(args)
    path = Path(args.input)
    _require(path, "raw recording")
    try:
        channels, subject = io.load_raw_recording(path)
    except (ValueError, FileNotFoundError) as exc:
        raise CliError(EXIT_DATA, "bad-data", str(exc)) from exc
    for name in (args.eeg, args.emg):
        if name not in channels:
            raise CliError(EXIT_DATA, "bad-data",
                           f"channel {name!r} not in recording "
                           f"(has {sorted(channels)})")
    try:
        eeg = resample(channels[args.eeg], config.target_rate)
        emg = resample(channels[args.emg], config.target_rate)
        dataset = label_dataset(eeg, emg, config.epoch_seconds, config.labeling,
                                subject_id=subject)
    except ValueError as exc:
        raise CliError(EXIT_DATA, "bad-data", str(exc)) from exc
    io.save_dataset(dataset.epochs, _dataset_path(workdir))
    io.write_meta(_dataset_path(workdir), config.config_hash(), "dataset")
    _write_config(workdir, config)
    counts = dataset.class_counts()
    print(f"labeled {len(dataset)} epochs: "
          + ", ".join(f"{k.value}={v}" for k, v in counts.items()))
    return EXIT_OK


def _train_cells(config: PipelineConfig, architectures, windows, dataset: Dataset):
    """Yield (arch, window, seed_index, label, pairs, spec, train_config)."""
    train_split, _ = make_split(dataset, config.split)
    streams = build_class_streams(train_split)
    pair_cache: dict = {}
    for arch in architectures:
        for window in windows:
            for seed_index in range(config.n_seeds):
                for label in CLASS_ORDER:
                    key = (window, label)
                    if key not in pair_cache:
                        pair_cache[key] = build_pairs(
                            streams[label], WindowConfig(window, config.horizon))
                    spec = ForecasterSpec(architecture=arch, context_len=window,
                                          horizon=config.horizon)
                    tc = dataclasses.replace(
                        config.train,
                        seed=stable_seed(config.base_seed, "forecaster", arch,
                                         window, seed_index, label.value))
                    yield arch, window, seed_index, label, pair_cache[key], spec, tc


def cmd_train_forecasters(args) -> int:
    config = _resolve_config(args)
    workdir = _workdir(args)
    dataset = _load_dataset_checked(workdir, config.config_hash())
    architectures = _narrow(config.architectures, args.forecaster, "forecaster")
    windows = _narrow(config.windows, args.window, "window")
    (workdir / "models").mkdir(exist_ok=True)
    trained = 0
    try:
        for arch, window, seed_index, label, pairs, spec, tc in _train_cells(
                config, architectures, windows, dataset):
            model = train_class_forecaster(pairs, spec, tc, label)
            stem = _model_stem(workdir, arch, window, seed_index, label)
            io.save_forecaster(model, stem)
            io.write_meta(stem.with_suffix(".bin"), config.config_hash(), "forecaster")
            trained += 1
            print(f"trained {model.model_id}: final loss "
                  f"{model.loss_curve[-1]:.6f}")
    except ValueError as exc:
        raise CliError(EXIT_DATA, "bad-data", str(exc)) from exc
    print(f"saved {trained} checkpoints to {workdir / 'models'}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    config = _resolve_config(args)
    workdir = _workdir(args)
    dataset = _load_dataset_checked(workdir, config.config_hash())
    architectures = _narrow(config.architectures, args.forecaster, "forecaster")
    windows = _narrow(config.windows, args.window, "window")
    train_split, _ = make_split(dataset, config.split)
    # Verify the full checkpoint set before writing anything.
    cells = [(arch, window, seed_index)
             for arch in architectures for window in windows
             for seed_index in range(config.n_seeds)]
    for arch, window, seed_index in cells:
        for label in CLASS_ORDER:
            stem = _model_stem(workdir, arch, window, seed_index, label)
            _require(stem.with_suffix(".bin"), f"forecaster checkpoint {stem.name}")
            _check_hash(stem.with_suffix(".bin"), config.config_hash())
    (workdir / "synthetic").mkdir(exist_ok=True)
    for arch, window, seed_index in cells:
        models = {label: io.load_forecaster(_model_stem(workdir, arch, window,
                                                        seed_index, label))
                  for label in CLASS_ORDER}
        synthetic = synthesize_dataset(
            models, train_split, target_len=dataset.epoch_length,
            seed=stable_seed(config.base_seed, "synth", arch, window, seed_index))
        path = _synthetic_path(workdir, arch, window, seed_index)
        io.save_synthetic(synthetic, path)
        io.write_meta(path, config.config_hash(), "synthetic")
        print(f"synthesized {len(synthetic)} epochs -> {path.name}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = _resolve_config(args)
    workdir = _workdir(args)
    dataset = _load_dataset_checked(workdir, config.config_hash())
    architectures = _narrow(config.architectures, args.forecaster, "forecaster")
    windows = _narrow(config.windows, args.window, "window")
    conditions = _narrow(config.conditions, args.condition, "condition")
    train_split, test_split = make_split(dataset, config.split)
    cache = _SpectrogramCache(config.stft)
    reports: list[RunReport] = []
    for arch in architectures:
        for window in windows:
            for seed_index in range(config.n_seeds):
                synthetic = None
                if any(c != "O" for c in conditions):
                    path = _require(_synthetic_path(workdir, arch, window, seed_index),
                                    "synthetic dataset")
                    _check_hash(path, config.config_hash())
                    loaded = io.load_dataset(path)
                    synthetic = _as_synthetic(loaded)
                for cond_name in conditions:
                    condition = Condition(cond_name)
                    clf_config = dataclasses.replace(
                        config.classifier,
                        seed=stable_seed(config.base_seed, "classifier", arch,
                                         window, condition.value, seed_index))
                    try:
                        metrics = evaluate_condition(
                            condition, train_split, test_split, synthetic,
                            config.stft, clf_config, config.conv_channels, cache)
                    except ValueError as exc:
                        raise CliError(EXIT_DATA, "bad-data", str(exc)) from exc
                    reports.append(RunReport(
                        condition=condition, forecaster=arch, window=window,
                        seed_index=seed_index, seed=clf_config.seed,
                        accuracy=metrics.accuracy, per_class=metrics.per_class,
                        confusion=metrics.confusion))
                    print(f"{arch} L={window} {condition.value} seed{seed_index}: "
                          f"accuracy {metrics.accuracy:.4f}")
    reports_dir = workdir / "reports"
    reports_dir.mkdir(exist_ok=True)
    io.save_reports(reports, reports_dir / "reports.ndjson")
    io.write_meta(reports_dir / "reports.ndjson", config.config_hash(), "reports")
    io.save_aggregate_csv(aggregate_reports(reports), reports_dir / "aggregate.csv")
    io.write_meta(reports_dir / "aggregate.csv", config.config_hash(), "aggregate")
    print(f"wrote {len(reports)} reports to {reports_dir}")
    return EXIT_OK


def _as_synthetic(loaded: Dataset):
    """Re-wrap a loaded synthetic NDJSON as a SyntheticDataset."""
    from .generator import SyntheticDataset

    models: dict = {}
    seed = 0
    for e in loaded:
        if e.provenance.is_original:
            raise CliError(EXIT_DATA, "bad-data",
                           f"epoch {e.identity} in a synthetic file has "
                           "original provenance")
        models.setdefault(e.label, e.provenance.model_id)
        seed = e.provenance.seed
    return SyntheticDataset(epochs=tuple(loaded.epochs), source_dataset_id="loaded",
                            models=models, generation_seed=seed)


def cmd_demo(args) -> int:
    if getattr(args, "config", None):
        config = _resolve_config(args)
    else:
        config = demo_profile(args.seed if args.seed is not None else 0)
    workdir = _workdir(args)
    eeg, emg, _ = make_toy_dataset(config.toy.epochs_per_class,
                                   config.toy.noise_sigma,
                                   seed=stable_seed(config.base_seed, "toy"))
    raw_path = workdir / "recording.bin"
    io.save_raw_recording(raw_path, {"EEG": eeg, "EMG": emg}, subject_id="toy")
    io.write_meta(raw_path, config.config_hash(), "raw-recording")

    label_args = argparse.Namespace(config=None, seed=None, input=str(raw_path),
                                    out=str(workdir), eeg="EEG", emg="EMG")
    _with_config(label_args, config)
    cmd_label(label_args)
    stage_args = argparse.Namespace(config=None, seed=None, out=str(workdir),
                                    forecaster=None, window=None, condition=None)
    _with_config(stage_args, config)
    cmd_train_forecasters(stage_args)
    cmd_synthesize(stage_args)
    cmd_evaluate(stage_args)
    print(f"demo artifacts in {workdir}")
    return EXIT_OK


def _with_config(namespace: argparse.Namespace, config: PipelineConfig) -> None:
    # Demo stages share one in-memory config; bypass file re-parsing.
    namespace._resolved_config = config


def demo_profile(seed: int) -> PipelineConfig:
    """Lean end-to-end profile: one forecaster, one window, two seeds."""
    return PipelineConfig(
        windows=(100,),
        architectures=("LinearDMS",),
        n_seeds=2,
        base_seed=seed,
        classifier=ClassifierTrainConfig(max_epochs=50),
        toy=ToyConfig(epochs_per_class=30, noise_sigma=0.1),
    )


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sleepsynth",
        description="Forecast-driven synthesis of labeled sleep-EEG and "
                    "utility evaluation.")
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default pipeline config as JSON and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p, out_required=True):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--seed", type=int, help="override the config base seed")
        p.add_argument("--out", required=out_required, help="artifact directory")

    p_label = sub.add_parser("label", help="label a raw EEG/EMG recording")
    common(p_label)
    p_label.add_argument("--input", required=True, help="raw recording path")
    p_label.add_argument("--eeg", default="EEG", help="EEG channel name")
    p_label.add_argument("--emg", default="EMG", help="EMG channel name")

    p_train = sub.add_parser("train-forecasters",
                             help="train per-class forecasters on the train split")
    common(p_train)
    p_train.add_argument("--window", type=int, help="restrict to one context length")
    p_train.add_argument("--forecaster", help="restrict to one architecture")

    p_synth = sub.add_parser("synthesize",
                             help="generate synthetic datasets from checkpoints")
    common(p_synth)
    p_synth.add_argument("--window", type=int)
    p_synth.add_argument("--forecaster")

    p_eval = sub.add_parser("evaluate",
                            help="train classifiers per condition and report metrics")
    common(p_eval)
    p_eval.add_argument("--window", type=int)
    p_eval.add_argument("--forecaster")
    p_eval.add_argument("--condition", choices=["O", "S", "OS"])

    p_demo = sub.add_parser("demo", help="full pipeline on the toy benchmark")
    common(p_demo)
    return parser


COMMANDS = {
    "label": cmd_label,
    "train-forecasters": cmd_train_forecasters,
    "synthesize": cmd_synthesize,
    "evaluate": cmd_evaluate,
    "demo": cmd_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(PipelineConfig().to_json())
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"sleepsynth: error: {exc.category}: {exc}", file=sys.stderr)
        return exc.code
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        print(f"sleepsynth: error: internal: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
