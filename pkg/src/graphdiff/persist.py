"""Saving and restoring trained models: GDF weights plus a JSON sidecar."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .denoiser import DenoiserConfig, GraphTransformer
from .engine.guidance import Regressor
from .graph import DatasetStats
from .io import CheckpointError, load_checkpoint, save_checkpoint
from .noise import DiscreteNoise, NoiseSchedule

_Y_MEAN = "__y_mean"
_Y_SCALE = "__y_scale"


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def _cfg_dict(cfg: DenoiserConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["features"] = sorted(cfg.features)
    return d


def _cfg_from(d: dict) -> DenoiserConfig:
    return DenoiserConfig(**d)


def stats_to_dict(stats: DatasetStats) -> dict:
    return {
        "node_marginals": stats.node_marginals.tolist(),
        "edge_marginals": stats.edge_marginals.tolist(),
        "node_count_hist": {str(k): v for k, v in stats.node_count_hist.items()},
    }


def stats_from_dict(d: dict) -> DatasetStats:
    return DatasetStats(
        np.array(d["node_marginals"]),
        np.array(d["edge_marginals"]),
        {int(k): float(v) for k, v in d["node_count_hist"].items()},
    )


def _write(path, state, meta) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(path, state)
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _read(path):
    path = Path(path)
    side = _sidecar(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    if not side.exists():
        raise CheckpointError(f"checkpoint metadata not found: {side}")
    return load_checkpoint(path), json.loads(side.read_text())


def save_model(path, model: GraphTransformer, noise_cfg: dict, stats: DatasetStats) -> None:
    meta = {
        "kind": "denoiser",
        "mode": model.mode,
        "a": model.a,
        "b": model.b,
        "model": _cfg_dict(model.cfg),
        "noise": noise_cfg,
        "stats": stats_to_dict(stats),
    }
    _write(path, model.store.state_dict(), meta)


def load_model(path):
    """Returns (model, noise, stats, meta). ``noise`` is None for continuous models."""
    state, meta = _read(path)
    if meta.get("kind") != "denoiser":
        raise CheckpointError(f"{path} does not hold a denoiser")
    model = GraphTransformer(_cfg_from(meta["model"]), meta["a"], meta["b"], mode=meta["mode"])
    model.store.load_state_dict(state)
    stats = stats_from_dict(meta["stats"])
    nc = meta["noise"]
    noise = DiscreteNoise.from_stats(NoiseSchedule(nc["T"], nc["s"]), nc["kind"], stats)
    return model, noise, stats, meta


def save_regressor(path, reg: Regressor, noise_cfg: dict, stats: DatasetStats) -> None:
    state = reg.store.state_dict()
    state[_Y_MEAN] = reg.y_mean
    state[_Y_SCALE] = reg.y_scale
    meta = {
        "kind": "regressor",
        "a": reg.net.a,
        "b": reg.net.b,
        "k": reg.k,
        "model": _cfg_dict(reg.net.cfg),
        "noise": noise_cfg,
        "stats": stats_to_dict(stats),
    }
    _write(path, state, meta)


def load_regressor(path) -> Regressor:
    state, meta = _read(path)
    if meta.get("kind") != "regressor":
        raise CheckpointError(f"{path} does not hold a regressor")
    reg = Regressor(_cfg_from(meta["model"]), meta["a"], meta["b"], meta["k"])
    reg.y_mean = state.pop(_Y_MEAN)
    reg.y_scale = state.pop(_Y_SCALE)
    reg.store.load_state_dict(state)
    return reg
