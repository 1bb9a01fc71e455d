"""Deployment configuration: one JSON file drives triggers, gating, skew
thresholds, training, augmentation, and serving. Every field has a
default; ``LESIONPIPE_CONFIG`` overrides the path and
``LESIONPIPE_DATA_DIR`` overrides the state directory."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .nn import TrainConfig
from .pipeline.gate import GateConfig
from .pipeline.triggers import TriggerConfig
from .pipeline.validation import SkewThresholds

ENV_CONFIG = "LESIONPIPE_CONFIG"
ENV_DATA_DIR = "LESIONPIPE_DATA_DIR"


@dataclass
class TrainSettings:
    arch: str = "small"
    input_shape: tuple[int, int, int] = (3, 32, 32)
    train_fraction: float = 0.85
    split_seed: int = 0
    init_seed: int = 0
    freeze_boundary: int = -1
    warm_start: bool = False          # fine-tune from the incumbent's weights
    base_weights: str | None = None   # or from an imported base ParameterSet
    normalize_mode: str = "unit"
    epochs: int = 100
    batch_size: int = 32
    loss: str = "bce"
    optimizer: str = "adam"
    lr: float = 1e-3

    def train_config(self) -> TrainConfig:
        return TrainConfig(loss=self.loss, optimizer=self.optimizer, lr=self.lr,
                           epochs=self.epochs, batch_size=self.batch_size,
                           shuffle_seed=self.init_seed)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainSettings":
        kwargs = {k: d[k] for k in (
            "arch", "train_fraction", "split_seed", "init_seed",
            "freeze_boundary", "warm_start", "base_weights", "normalize_mode",
            "epochs", "batch_size", "loss", "optimizer", "lr") if k in d}
        if "input_shape" in d:
            kwargs["input_shape"] = tuple(d["input_shape"])
        return cls(**kwargs)


@dataclass
class AugmentSettings:
    enabled: bool = True
    multiplicity: dict[str, int] = field(
        default_factory=lambda: {"benign": 3, "malignant": 4})
    targets: dict[str, int] | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentSettings":
        kwargs = {k: d[k] for k in ("enabled", "multiplicity", "targets", "seed")
                  if k in d}
        return cls(**kwargs)


@dataclass
class ServeSettings:
    port: int = 8732
    max_body_bytes: int = 8 * 1024 * 1024
    request_log_limit: int = 10_000
    store_uploads: bool = False  # opt-in spill of uploads for retraining
    feedback_scope: str = "production_only"  # or "all_versions"
    console_dir: str | None = None
    auth_token: str | None = None  # shared-token header hook; off by default

    @classmethod
    def from_dict(cls, d: dict) -> "ServeSettings":
        kwargs = {k: d[k] for k in (
            "port", "max_body_bytes", "request_log_limit", "store_uploads",
            "feedback_scope", "console_dir", "auth_token") if k in d}
        return cls(**kwargs)


@dataclass
class PipelineConfig:
    data_dir: Path = Path(".lesionpipe")
    manifest: str | None = None
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    gate: GateConfig = field(default_factory=GateConfig)
    skew: SkewThresholds = field(default_factory=SkewThresholds)
    train: TrainSettings = field(default_factory=TrainSettings)
    augment: AugmentSettings = field(default_factory=AugmentSettings)
    serve: ServeSettings = field(default_factory=ServeSettings)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            data_dir=Path(d.get("data_dir", ".lesionpipe")),
            manifest=d.get("manifest"),
            trigger=TriggerConfig.from_dict(d.get("trigger", {})),
            gate=GateConfig.from_dict(d.get("gate", {})),
            skew=SkewThresholds.from_dict(d.get("skew", {})),
            train=TrainSettings.from_dict(d.get("train", {})),
            augment=AugmentSettings.from_dict(d.get("augment", {})),
            serve=ServeSettings.from_dict(d.get("serve", {})),
        )


def load_config(path: str | Path | None = None) -> PipelineConfig:
    """Load config from `path`, else $LESIONPIPE_CONFIG, else defaults.
    $LESIONPIPE_DATA_DIR overrides the state directory either way."""
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = PipelineConfig.from_dict(doc)
    else:
        cfg = PipelineConfig()
    env_dir = os.environ.get(ENV_DATA_DIR)
    if env_dir:
        cfg.data_dir = Path(env_dir)
    return cfg
