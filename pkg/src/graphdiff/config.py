"""Experiment configuration: strict TOML with typed sections.

Every key must be known; a typo is an error rather than a silently ignored
default. Sections and keys::

    [data]      path, generator, num_graphs, split, min_nodes, max_nodes,
                communities, p_intra, p_inter, p_low, p_high
    [noise]     T, s, kind
    [model]     mode, n_layers, hidden_x, hidden_e, hidden_y, heads,
                ff_x, ff_e, ff_y, lam, features
    [train]     steps, batch_size, lr, optimizer, grad_clip, log_every
    [sample]    count, n, batch_size
    [guidance]  scale, target, regressor_steps, regressor_layers,
                regressor_features, property
    [eval]      molecular, n_boot
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    path: str = "data/manifest.json"
    generator: str = "cycles"
    num_graphs: int = 200
    split: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    min_nodes: int = 6
    max_nodes: int = 8
    communities: list = field(default_factory=lambda: [2, 2])
    p_intra: float = 0.7
    p_inter: float = 0.05
    p_low: float = 0.1
    p_high: float = 0.6


@dataclass
class NoiseConfig:
    T: int = 500
    s: float = 0.008
    kind: str = "marginal"


@dataclass
class ModelConfig:
    mode: str = "digress"
    n_layers: int = 4
    hidden_x: int = 64
    hidden_e: int = 32
    hidden_y: int = 16
    heads: int = 4
    ff_x: int = 128
    ff_e: int = 64
    ff_y: int = 32
    lam: float = 5.0
    features: str = "cycles"


@dataclass
class TrainConfig:
    steps: int = 1000
    batch_size: int = 16
    lr: float = 2e-3
    optimizer: str = "adam"
    grad_clip: float = 0.0
    log_every: int = 100


@dataclass
class SampleConfig:
    count: int = 100
    n: object = "auto"
    batch_size: int = 256


@dataclass
class GuidanceConfig:
    scale: float = 0.0
    target: list = field(default_factory=lambda: [0.0])
    regressor_steps: int = 1000
    # a shallow regressor on the raw graph has input gradients that track edge flips
    regressor_layers: int = 1
    regressor_features: str = "none"
    property: str = "edge_count"


@dataclass
class EvalConfig:
    molecular: bool = False
    n_boot: int = 0


@dataclass
class Config:
    data: DataConfig = field(default_factory=DataConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


CHOICES = {
    ("data", "generator"): ("cycles", "sbm", "planar", "molecules", "er"),
    ("noise", "kind"): ("uniform", "marginal"),
    ("model", "mode"): ("digress", "congress"),
    ("train", "optimizer"): ("adam", "sgd"),
    ("guidance", "property"): ("edge_count",),
}


def _coerce(section: str, key: str, value, default):
    where = f"[{section}] {key}"
    if section == "sample" and key == "n":
        if value == "auto" or (isinstance(value, int) and not isinstance(value, bool) and value > 0):
            return value
        raise ConfigError(f"{where}: expected \"auto\" or a positive integer, got {value!r}")
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, str)
    if not ok:
        raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")
    choices = CHOICES.get((section, key))
    if choices and value not in choices:
        raise ConfigError(f"{where}: {value!r} is not one of {choices}")
    return value


def from_dict(raw: dict) -> Config:
    cfg = Config()
    known = {f.name for f in dataclasses.fields(Config)}
    for section, body in raw.items():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]; known: {sorted(known)}")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        target = getattr(cfg, section)
        fields = {f.name for f in dataclasses.fields(target)}
        for key, value in body.items():
            if key not in fields:
                raise ConfigError(f"unknown key '{key}' in [{section}]; known: {sorted(fields)}")
            setattr(target, key, _coerce(section, key, value, getattr(target, key)))
    return cfg


def load(path) -> Config:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(raw)
