"""Experiment configuration tree, loaded from YAML (or JSON) with strict keys."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .contrastive import DclConfig
from .episodes import TaskSpec
from .evaluation import EvalConfig
from .learners import DEFAULT_STEPS, LEARNERS, ImamlConfig
from .manifold import Augmenter

SWEEP_MODES = ("supervised", "batman", "man", "rand", "ssl")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "synthetic"
    train_classes: int = 20
    test_classes: int = 10
    dim: int = 16
    signal_dims: Optional[int] = 4
    class_sep: float = 6.0
    within_std: float = 1.0
    per_class: int = 40
    train_csv: Optional[str] = None
    test_csv: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("synthetic", "csv"):
            raise ConfigError(f"dataset.kind must be 'synthetic' or 'csv', got {self.kind!r}")
        if self.kind == "csv" and not (self.train_csv and self.test_csv):
            raise ConfigError("csv datasets need dataset.train_csv and dataset.test_csv")


@dataclass(frozen=True)
class NetworkConfig:
    hidden: tuple = (64,)
    embedding: int = 32
    activation: str = "relu"


@dataclass(frozen=True)
class InnerSection:
    steps: dict = field(default_factory=lambda: dict(DEFAULT_STEPS))
    supervised_lr: float = 0.1
    contrastive_lr: float = 0.1
    batman_v: int = 5
    support_augs: int = 5

    def __post_init__(self):
        unknown = set(self.steps) - set(LEARNERS)
        if unknown:
            raise ConfigError(f"inner.steps: unknown learners {sorted(unknown)}")
        object.__setattr__(self, "steps", {**DEFAULT_STEPS, **self.steps})


@dataclass(frozen=True)
class OuterSection:
    meta_batch: int = 5
    ssl_meta_batch: int = 25
    reptile_beta: float = 1.0
    supervised_grad_beta: float = 0.1
    contrastive_grad_beta: float = 0.01
    query_v: int = 15
    query_augs: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = DatasetConfig()
    task: TaskSpec = TaskSpec(5, 5, 15)
    # meta-training support size per learner; meta-testing always uses task.K
    support_k: dict = field(default_factory=dict)
    epsilons: tuple = (0.0, 0.3, 0.6)
    learners: tuple = LEARNERS
    modes: tuple = ("supervised", "batman")
    network: NetworkConfig = NetworkConfig()
    inner: InnerSection = InnerSection()
    outer: OuterSection = OuterSection()
    imaml: ImamlConfig = ImamlConfig()
    dcl: DclConfig = DclConfig()
    augment: Augmenter = Augmenter(jitter_std=1.0, scale_range=(0.8, 1.2))
    eval: EvalConfig = EvalConfig()
    epochs: int = 300
    runs: int = 1
    seed: int = 0
    record_timing: bool = False
    output_dir: str = "results"

    def __post_init__(self):
        for e in self.epsilons:
            if not 0.0 <= e <= 1.0:
                raise ConfigError(f"epsilon {e} outside [0, 1]")
        for name in self.learners:
            if name not in LEARNERS:
                raise ConfigError(f"unknown learner {name!r}; choose from {LEARNERS}")
        for m in self.modes:
            if m not in SWEEP_MODES:
                raise ConfigError(f"unknown mode {m!r}; choose from {SWEEP_MODES}")
        for name, k in self.support_k.items():
            if name not in LEARNERS or int(k) < 1:
                raise ConfigError(f"support_k: invalid entry {name!r}: {k!r}")
        if self.epochs < 0 or self.runs < 1:
            raise ConfigError("epochs must be >= 0 and runs >= 1")


_SECTIONS = {
    "dataset": DatasetConfig,
    "task": TaskSpec,
    "network": NetworkConfig,
    "inner": InnerSection,
    "outer": OuterSection,
    "imaml": ImamlConfig,
    "dcl": DclConfig,
    "augment": Augmenter,
    "eval": EvalConfig,
}
_TUPLE_KEYS = {"epsilons", "learners", "modes", "hidden", "scale_range"}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is ExperimentConfig:
            value = _build(_SECTIONS[key], value, key)
        elif key in _TUPLE_KEYS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: Optional[dict]) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}, "config")


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON ({exc})") from exc
    return config_from_dict(data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, (tuple, list)):
            return [conv(x) for x in v]
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        return v
    return conv(cfg)
