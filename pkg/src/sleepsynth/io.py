"""Serialization: datasets, raw recordings, checkpoints, and reports.

Datasets travel as NDJSON (one epoch object per line) so they are
self-describing and diff-able; raw recordings use a float32 binary or
single-column CSV stream with a JSON sidecar; model checkpoints are a
little-endian float64 parameter blob plus a JSON header. All writes go
through write-temp-then-rename for crash consistency, and artifacts get a
.meta.json sidecar carrying the producing config's hash.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .classifier import ClassifierSpec, TrainedClassifier
from .evaluation import AggregateRow, RunReport
from .features import Spectrogram
from .forecasters import (ARCHITECTURES, ForecasterModel, ForecasterSpec,
                          parameter_count)
from .generator import SyntheticDataset
from .nn import ParameterVector
from .signals import ClassLabel, Dataset, LabeledEpoch, Provenance, Signal


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_meta(path: Path, config_hash: str, kind: str) -> None:
    meta = {"config_hash": config_hash, "kind": kind}
    atomic_write_text(Path(str(path) + ".meta.json"),
                      json.dumps(meta, sort_keys=True) + "\n")


def read_meta(path: Path) -> dict:
    meta_path = Path(str(path) + ".meta.json")
    if not meta_path.exists():
        raise FileNotFoundError(f"missing meta sidecar for {path}")
    return json.loads(meta_path.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Epoch datasets (NDJSON)
# ---------------------------------------------------------------------------


def _provenance_to_obj(p: Provenance) -> dict:
    if p.is_original:
        return {"kind": "original"}
    return {"kind": "synthetic", "model_id": p.model_id,
            "source_subject": p.source_subject,
            "source_epoch_index": p.source_epoch_index, "seed": p.seed}


def _provenance_from_obj(obj: dict) -> Provenance:
    if obj.get("kind") == "original":
        return Provenance.original()
    if obj.get("kind") == "synthetic":
        return Provenance.synthetic(model_id=obj["model_id"],
                                    source_subject=obj["source_subject"],
                                    source_epoch_index=int(obj["source_epoch_index"]),
                                    seed=int(obj["seed"]))
    raise ValueError(f"unknown provenance kind {obj.get('kind')!r}")


def epoch_to_record(epoch: LabeledEpoch) -> dict:
    return {"subject_id": epoch.subject_id, "epoch_index": epoch.epoch_index,
            "label": epoch.label.value, "sample_rate": epoch.signal.sample_rate,
            "samples": [float(v) for v in epoch.signal.samples],
            "provenance": _provenance_to_obj(epoch.provenance)}


def epoch_from_record(obj: dict) -> LabeledEpoch:
    required = {"subject_id", "epoch_index", "label", "sample_rate", "samples",
                "provenance"}
    missing = required - set(obj)
    if missing:
        raise ValueError(f"missing field(s): {sorted(missing)}")
    try:
        label = ClassLabel(obj["label"])
    except ValueError:
        raise ValueError(f"unknown label {obj['label']!r}") from None
    return LabeledEpoch(signal=Signal(np.array(obj["samples"], dtype=np.float64),
                                      int(obj["sample_rate"])),
                        label=label, subject_id=str(obj["subject_id"]),
                        epoch_index=int(obj["epoch_index"]),
                        provenance=_provenance_from_obj(obj["provenance"]))


def save_dataset(epochs: Iterable[LabeledEpoch], path: Path) -> None:
    lines = [json.dumps(epoch_to_record(e), sort_keys=True) for e in epochs]
    atomic_write_text(Path(path), "\n".join(lines) + ("\n" if lines else ""))


def load_dataset(path: Path) -> Dataset:
    """Parse an NDJSON epoch file; malformed lines fail with their number."""
    path = Path(path)
    epochs: list[LabeledEpoch] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                epochs.append(epoch_from_record(obj))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed epoch record "
                                 f"({exc})") from exc
    if not epochs:
        warnings.warn(f"{path}: empty dataset", stacklevel=2)
    return Dataset(epochs)


def save_synthetic(synthetic: SyntheticDataset, path: Path) -> None:
    save_dataset(synthetic.epochs, path)


# ---------------------------------------------------------------------------
# Raw recordings: binary float32 or single-column CSV, with a JSON sidecar
# ---------------------------------------------------------------------------


def sidecar_path(data_path: Path) -> Path:
    return Path(data_path).with_suffix(".json")


def save_raw_recording(path: Path, channels: dict[str, Signal],
                       subject_id: str) -> None:
    """Write channels as an interleaved little-endian float32 stream."""
    path = Path(path)
    names = list(channels)
    arrays = [channels[n].samples for n in names]
    rates = {channels[n].sample_rate for n in names}
    lengths = {len(a) for a in arrays}
    if len(rates) != 1 or len(lengths) != 1:
        raise ValueError("all channels must share one rate and length")
    frames = np.stack(arrays, axis=1).astype("<f4")
    atomic_write_bytes(path, frames.tobytes())
    sidecar = {"sample_rate": rates.pop(), "channel_names": names,
               "subject_id": subject_id}
    atomic_write_text(sidecar_path(path), json.dumps(sidecar, sort_keys=True) + "\n")


def load_raw_recording(path: Path) -> tuple[dict[str, Signal], str]:
    """Read a raw recording (binary or CSV) plus its JSON sidecar.

    Returns (channels by name, subject_id). Binary files hold float32
    frames interleaved across channels; CSV files hold one column of
    samples and require a single-channel sidecar.
    """
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise FileNotFoundError(f"missing sidecar {side}")
    meta = json.loads(side.read_text(encoding="utf-8"))
    for key in ("sample_rate", "channel_names", "subject_id"):
        if key not in meta:
            raise ValueError(f"{side}: sidecar missing {key!r}")
    names = list(meta["channel_names"])
    rate = int(meta["sample_rate"])
    if path.suffix.lower() == ".csv":
        if len(names) != 1:
            raise ValueError("CSV recordings hold exactly one channel")
        with open(path, "r", encoding="utf-8", newline="") as fh:
            values = [float(row[0]) for row in csv.reader(fh) if row]
        data = np.array(values, dtype=np.float64)[:, None]
    else:
        raw = np.frombuffer(path.read_bytes(), dtype="<f4")
        if raw.size % len(names) != 0:
            raise ValueError(f"{path}: sample count {raw.size} not divisible by "
                             f"{len(names)} channels")
        data = raw.reshape(-1, len(names)).astype(np.float64)
    channels = {name: Signal(data[:, i], rate) for i, name in enumerate(names)}
    return channels, str(meta["subject_id"])


# ---------------------------------------------------------------------------
# Model checkpoints: float64 blob + JSON header
# ---------------------------------------------------------------------------


def save_forecaster(model: ForecasterModel, path_stem: Path) -> None:
    stem = Path(path_stem)
    header = {"kind": "forecaster",
              "architecture": model.spec.architecture,
              "context_len": model.spec.context_len,
              "horizon": model.spec.horizon,
              "hidden_width": model.spec.hidden_width,
              "label": model.label.value if model.label else None,
              "train_seed": model.train_seed,
              "loss_curve": list(model.loss_curve),
              "param_count": model.params.size}
    atomic_write_bytes(stem.with_suffix(".bin"),
                       model.params.flat.astype("<f8").tobytes())
    atomic_write_text(stem.with_suffix(".json"),
                      json.dumps(header, sort_keys=True) + "\n")


def load_forecaster(path_stem: Path) -> ForecasterModel:
    stem = Path(path_stem)
    header = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    if header.get("kind") != "forecaster":
        raise ValueError(f"{stem}: not a forecaster checkpoint")
    spec = ForecasterSpec(architecture=header["architecture"],
                          context_len=int(header["context_len"]),
                          horizon=int(header["horizon"]),
                          hidden_width=header["hidden_width"])
    flat = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    if flat.size != parameter_count(spec):
        raise ValueError(f"{stem}: parameter blob has {flat.size} values, "
                         f"spec needs {parameter_count(spec)}")
    params = ParameterVector(ARCHITECTURES[spec.architecture].layout(spec),
                             flat).freeze()
    label = ClassLabel(header["label"]) if header["label"] else None
    return ForecasterModel(spec=spec, params=params, label=label,
                           train_seed=int(header["train_seed"]),
                           loss_curve=tuple(header["loss_curve"]))


def save_classifier(model: TrainedClassifier, path_stem: Path) -> None:
    stem = Path(path_stem)
    header = {"kind": "classifier",
              "input_shape": list(model.spec.input_shape),
              "conv_channels": list(model.spec.conv_channels),
              "n_classes": model.spec.n_classes,
              "train_seed": model.train_seed,
              "loss_curve": list(model.loss_curve),
              "param_count": model.params.size}
    atomic_write_bytes(stem.with_suffix(".bin"),
                       model.params.flat.astype("<f8").tobytes())
    atomic_write_text(stem.with_suffix(".json"),
                      json.dumps(header, sort_keys=True) + "\n")


def load_classifier(path_stem: Path) -> TrainedClassifier:
    from .classifier import _layout  # checkpoint layout mirrors training

    stem = Path(path_stem)
    header = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    if header.get("kind") != "classifier":
        raise ValueError(f"{stem}: not a classifier checkpoint")
    spec = ClassifierSpec(input_shape=tuple(header["input_shape"]),
                          conv_channels=tuple(header["conv_channels"]),
                          n_classes=int(header["n_classes"]))
    flat = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    params = ParameterVector(_layout(spec), flat).freeze()
    return TrainedClassifier(spec=spec, params=params,
                             train_seed=int(header["train_seed"]),
                             loss_curve=tuple(header["loss_curve"]))


def save_spectrogram(spec: Spectrogram, path_stem: Path,
                     stats_id: str | None = None) -> None:
    """Debug dump: float32 matrix blob plus a JSON shape header."""
    stem = Path(path_stem)
    header = {"kind": "spectrogram", "bins": spec.shape[0], "frames": spec.shape[1],
              "stage": spec.stage, "stats_id": stats_id}
    atomic_write_bytes(stem.with_suffix(".bin"),
                       spec.values.astype("<f4").tobytes())
    atomic_write_text(stem.with_suffix(".json"),
                      json.dumps(header, sort_keys=True) + "\n")


def load_spectrogram(path_stem: Path) -> Spectrogram:
    stem = Path(path_stem)
    header = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    if header.get("kind") != "spectrogram":
        raise ValueError(f"{stem}: not a spectrogram dump")
    raw = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f4")
    values = raw.reshape(header["bins"], header["frames"]).astype(np.float64)
    return Spectrogram(values=values, stage=header["stage"])


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def save_reports(reports: Sequence[RunReport], path: Path) -> None:
    lines = [json.dumps(r.to_record(), sort_keys=True) for r in reports]
    atomic_write_text(Path(path), "\n".join(lines) + ("\n" if lines else ""))


def save_aggregate_csv(rows: Sequence[AggregateRow], path: Path) -> None:
    """One row per (forecaster, window); accuracy mean/std per condition."""
    conditions: list[str] = []
    for row in rows:
        if row.condition.value not in conditions:
            conditions.append(row.condition.value)
    cells: dict[tuple[str, int], dict[str, AggregateRow]] = {}
    order: list[tuple[str, int]] = []
    for row in rows:
        key = (row.forecaster, row.window)
        if key not in cells:
            cells[key] = {}
            order.append(key)
        cells[key][row.condition.value] = row
    lines = ["forecaster,window," + ",".join(
        f"{c}_mean,{c}_std" for c in conditions)]
    for key in order:
        parts = [key[0], str(key[1])]
        for c in conditions:
            row = cells[key].get(c)
            if row is None:
                parts.extend(["", ""])
            else:
                parts.extend([f"{row.mean_accuracy:.6f}", f"{row.std_accuracy:.6f}"])
        lines.append(",".join(parts))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
