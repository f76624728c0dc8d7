"""Experiment configuration file.

A TOML document with the sections ``[generator]``, ``[sensors]``,
``[model]``, ``[training]``, ``[federated]``, ``[recommender]`` and
``[metrics]`` plus a top-level ``seed``. Every key has a default; unknown
sections or keys are rejected.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np
import tomli_w

from rimsim.fedsim import FedConfig
from rimsim.features import IdealRanges
from rimsim.mlp import Architecture, TrainConfig
from rimsim.recommender import RecommenderConfig, load_catalog
from rimsim.sensorsim import SensorConfig
from rimsim.synthgen import GeneratorConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ModelSection:
    input_dim: int = 7
    hidden: tuple[int, ...] = (64, 32, 16, 8, 4)
    output_dim: int = 2
    activation: str = "relu"
    split_index: int = 3
    ideal_sleep: tuple[float, float] = (7.0, 9.0)
    ideal_distance: tuple[float, float] = (5.0, 8.0)

    @property
    def arch(self) -> Architecture:
        return Architecture(self.input_dim, self.hidden, self.output_dim, self.activation,
                            self.split_index)

    @property
    def ranges(self) -> IdealRanges:
        return IdealRanges(self.ideal_sleep, self.ideal_distance)

    def validate(self) -> None:
        self.arch.validate()
        self.ranges.validate()


@dataclass(frozen=True)
class TrainingSection(TrainConfig):
    pretrain_users: int = 1000
    pretrain_days: int = 10
    holdout_fraction: float = 0.2

    @property
    def train_cfg(self) -> TrainConfig:
        keep = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in keep})

    def validate(self) -> None:
        super().validate()
        if self.pretrain_users < 1 or self.pretrain_days < 1:
            raise ValueError("pretrain_users and pretrain_days must be >= 1")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in [0, 1)")


@dataclass(frozen=True)
class RecommenderSection:
    w_sleep: float = 1.0
    w_distance: float = 0.8
    w_bmi: float = 1.0
    w_meal: float = 1.0
    tau_sleep: float = 0.5
    tau_distance: float = 0.5
    theta: float = 0.5
    r_high: float = 3.0
    top_n: int = 2
    bmi_range: tuple[float, float] = (18.5, 24.9)
    bmi_cap: float = 3.0
    interaction_factor: float = 0.5
    catalog: str = ""

    def build(self) -> RecommenderConfig:
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "catalog"}
        return RecommenderConfig(**kw, catalog=load_catalog(self.catalog or None))

    def validate(self) -> None:
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "catalog"}
        RecommenderConfig(**kw, catalog={}).validate()
        if self.catalog and not Path(self.catalog).is_file():
            raise ValueError(f"catalog file {self.catalog} not found")


@dataclass(frozen=True)
class MetricsSection:
    eps_zero: float = 0.0
    per_output: bool = False

    def validate(self) -> None:
        if self.eps_zero < 0:
            raise ValueError("eps_zero must be >= 0")


_SECTIONS = {
    "generator": GeneratorConfig,
    "sensors": SensorConfig,
    "model": ModelSection,
    "training": TrainingSection,
    "federated": FedConfig,
    "recommender": RecommenderSection,
    "metrics": MetricsSection,
}

# Child-seed slots under the master seed; append only.
SEED_SLOTS = ("pretrain_data", "pretrain_split", "pretrain_init", "pretrain_train",
              "client_data", "partition", "federated")


@dataclass
class ExperimentConfig:
    seed: int = 42
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    federated: FedConfig = field(default_factory=FedConfig)
    recommender: RecommenderSection = field(default_factory=RecommenderSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)

    def validate(self) -> None:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a non-negative integer")
        for name in _SECTIONS:
            try:
                getattr(self, name).validate()
            except ValueError as exc:
                raise ConfigError(name, str(exc)) from exc

    def derive_seed(self, slot: str) -> int:
        idx = SEED_SLOTS.index(slot)
        return int(np.random.SeedSequence(self.seed, spawn_key=(idx,)).generate_state(1)[0])

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"seed": self.seed}
        for name in _SECTIONS:
            out[name] = {k: list(v) if isinstance(v, tuple) else v
                         for k, v in dataclasses.asdict(getattr(self, name)).items()}
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def replace(self, **sections) -> "ExperimentConfig":
        return dataclasses.replace(self, **sections)


def _coerce(section: str, cls, raw: dict):
    if not isinstance(raw, dict):
        raise ConfigError(section, "must be a table")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown key")
        default = getattr(cls(), key)
        try:
            kwargs[key] = _convert(value, default)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}.{key}", str(exc)) from exc
    try:
        obj = cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(section, str(exc)) from exc
    return obj


def _convert(value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError(f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise TypeError(f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, list):
            raise TypeError(f"expected an array, got {value!r}")
        if default and len(default) == 2 and isinstance(default[0], float) and len(value) != 2:
            raise ValueError(f"expected [min, max], got {value!r}")
        kind = type(default[0]) if default else float
        return tuple(_convert(v, kind()) for v in value)
    raise TypeError(f"unsupported value {value!r}")


def from_dict(doc: dict) -> ExperimentConfig:
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key == "seed":
            kwargs["seed"] = _convert(value, 0) if not isinstance(value, bool) else None
            if kwargs["seed"] is None:
                raise ConfigError("seed", "expected an integer")
        elif key in _SECTIONS:
            kwargs[key] = _coerce(key, _SECTIONS[key], value)
        else:
            raise ConfigError(key, "unknown section")
    cfg = ExperimentConfig(**kwargs)
    cfg.validate()
    return cfg


def load(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
        cfg.validate()
        return cfg
    try:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"invalid TOML: {exc}") from exc
    return from_dict(doc)
