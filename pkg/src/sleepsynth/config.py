"""Pipeline configuration: one JSON document drives every stage.

Defaults follow the stated training recipe wherever one exists (batch 32,
1000 forecaster steps, horizon 500, Hann 128 with 50% overlap, SGD at
1e-4, 5 seeds); everything else is a desk-scale benchmark choice. The
SHA-256 hash of the canonical JSON form is stamped onto every artifact so
stages refuse to mix outputs of different configurations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .classifier import ClassifierTrainConfig
from .evaluation import SplitSpec
from .features import STFTConfig
from .forecasters import TrainConfig
from .labeling import FrequencyBand, LabelingConfig
from .windowing import DEFAULT_HORIZON, DEFAULT_WINDOW_SWEEP


@dataclass(frozen=True)
class ToyConfig:
    epochs_per_class: int = 30
    noise_sigma: float = 0.1

    def __post_init__(self) -> None:
        if self.epochs_per_class < 1:
            raise ValueError("epochs_per_class must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class PipelineConfig:
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    windows: tuple[int, ...] = DEFAULT_WINDOW_SWEEP
    horizon: int = DEFAULT_HORIZON
    architectures: tuple[str, ...] = ("LinearDMS", "MLP")
    train: TrainConfig = field(default_factory=TrainConfig)
    stft: STFTConfig = field(default_factory=STFTConfig)
    classifier: ClassifierTrainConfig = field(default_factory=ClassifierTrainConfig)
    conv_channels: tuple[int, ...] = (8, 16)
    split: SplitSpec = field(default_factory=SplitSpec)
    conditions: tuple[str, ...] = ("O", "S", "OS")
    n_seeds: int = 5
    base_seed: int = 0
    target_rate: int = 100
    epoch_seconds: float = 5.0
    toy: ToyConfig = field(default_factory=ToyConfig)

    def __post_init__(self) -> None:
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.target_rate < 1:
            raise ValueError("target_rate must be >= 1")
        if not self.windows:
            raise ValueError("need at least one window size")
        from .forecasters import ARCHITECTURE_NAMES
        for arch in self.architectures:
            if arch not in ARCHITECTURE_NAMES:
                raise ValueError(f"unknown architecture {arch!r}")
        for cond in self.conditions:
            if cond not in ("O", "S", "OS"):
                raise ValueError(f"unknown condition {cond!r}; use O, S, or OS")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _require_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValueError(f"unknown config key(s) in {where}: {sorted(unknown)}")


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a PipelineConfig from parsed JSON, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ValueError("config root must be a JSON object")
    defaults = PipelineConfig()
    _require_keys(data, set(defaults.to_dict()), "config root")

    def band(d: dict, where: str) -> FrequencyBand:
        _require_keys(d, {"low", "high"}, where)
        return FrequencyBand(low=float(d["low"]), high=float(d["high"]))

    kwargs: dict = {}
    if "labeling" in data:
        sec = data["labeling"]
        _require_keys(sec, {"delta", "theta", "emg_threshold_factor"}, "labeling")
        base = LabelingConfig()
        kwargs["labeling"] = LabelingConfig(
            delta=band(sec["delta"], "labeling.delta") if "delta" in sec else base.delta,
            theta=band(sec["theta"], "labeling.theta") if "theta" in sec else base.theta,
            emg_threshold_factor=float(sec.get("emg_threshold_factor",
                                               base.emg_threshold_factor)))
    for name, cls in (("train", TrainConfig), ("stft", STFTConfig),
                      ("classifier", ClassifierTrainConfig), ("split", SplitSpec),
                      ("toy", ToyConfig)):
        if name in data:
            sec = data[name]
            _require_keys(sec, set(asdict(cls())), name)
            kwargs[name] = cls(**sec)
    for name in ("windows", "architectures", "conditions", "conv_channels"):
        if name in data:
            kwargs[name] = tuple(data[name])
    for name in ("horizon", "n_seeds", "base_seed", "target_rate", "epoch_seconds"):
        if name in data:
            kwargs[name] = type(getattr(defaults, name))(data[name])
    return PipelineConfig(**kwargs)


def load_config(path: str) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config {path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
