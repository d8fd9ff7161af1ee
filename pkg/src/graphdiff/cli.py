"""Command-line entry point.

Each command writes into a run directory (``--out``) holding ``run.json``
with the command, seed and fully resolved configuration, next to its outputs.
Relative data paths in a config file resolve against the file's directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import config as C
from . import datagen, metrics
from .denoiser import CONGRESS, DenoiserConfig, GraphTransformer
from .engine import congress as cg
from .engine.guidance import Regressor, guided_sample, train_regressor
from .engine.likelihood import elbo
from .engine.sampling import ScaffoldMask, sample
from .engine.training import OptimConfig, fit
from .graph import GraphError, compute_stats
from .io import CheckpointError, read_graphs, read_manifest, write_graphs, write_manifest
from .noise import ContinuousNoiseParams, DiscreteNoise, NoiseSchedule
from .persist import load_model, load_regressor, save_model, save_regressor

log = logging.getLogger("graphdiff")

STOCHASTIC = {"gen-data", "train", "sample", "elbo", "train-regressor", "guide", "scaffold"}


class CliError(Exception):
    pass


# --- helpers ------------------------------------------------------------------------


def _rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator per purpose, derived from the run seed."""
    return np.random.default_rng([seed, stream])


def _resolve(cfg_path: Path | None, p: str) -> Path:
    p = Path(p)
    if p.is_absolute() or cfg_path is None:
        return p
    return cfg_path.parent / p


def _load_config(args) -> C.Config:
    cfg = C.load(args.config) if args.config else C.Config()
    if getattr(args, "mode", None):
        cfg.model.mode = args.mode
    if getattr(args, "transitions", None):
        cfg.noise.kind = args.transitions
    if getattr(args, "features", None):
        cfg.model.features = args.features
    if getattr(args, "count", None) is not None:
        cfg.sample.count = args.count
    if getattr(args, "guidance_scale", None) is not None:
        cfg.guidance.scale = args.guidance_scale
    if getattr(args, "target", None) is not None:
        cfg.guidance.target = [float(v) for v in args.target.split(",")]
    return cfg


def _start_run(args, cfg: C.Config) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = {"command": args.command, "seed": args.seed, "config": cfg.to_dict()}
    for k in ("checkpoint", "regressor", "generated", "scaffold_file"):
        if getattr(args, k, None):
            record[k] = str(getattr(args, k))
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return out


def _split(args, cfg: C.Config, name: str):
    manifest = read_manifest(_resolve(Path(args.config) if args.config else None, cfg.data.path))
    if name not in manifest:
        raise CliError(f"manifest has no '{name}' split")
    return read_graphs(manifest[name])


def _denoiser_cfg(cfg: C.Config) -> DenoiserConfig:
    m = cfg.model
    return DenoiserConfig(m.n_layers, m.hidden_x, m.hidden_e, m.hidden_y, m.heads, m.ff_x, m.ff_e, m.ff_y,
                          m.lam, m.features)


def _noise_cfg(cfg: C.Config) -> dict:
    return {"T": cfg.noise.T, "s": cfg.noise.s, "kind": cfg.noise.kind}


def _optim(cfg: C.Config) -> OptimConfig:
    t = cfg.train
    return OptimConfig(lr=t.lr, optimizer=t.optimizer, grad_clip=t.grad_clip)


def _sample_size(cfg: C.Config):
    return cfg.sample.n


# --- commands -------------------------------------------------------------------------


def cmd_gen_data(args, cfg: C.Config, out: Path) -> None:
    d = cfg.data
    rng = _rng(args.seed, 0)
    if d.generator == "cycles":
        graphs = datagen.gen_cycles(d.num_graphs, (d.min_nodes, d.max_nodes), rng)
    elif d.generator == "sbm":
        graphs = datagen.gen_sbm(d.num_graphs, tuple(d.communities), (d.min_nodes, d.max_nodes), d.p_intra,
                                 d.p_inter, rng)
    elif d.generator == "planar":
        graphs = datagen.gen_planar(d.num_graphs, d.max_nodes, rng)
    elif d.generator == "molecules":
        graphs = datagen.gen_toy_molecules(d.num_graphs, rng=rng, size_range=(d.min_nodes, d.max_nodes))
    else:
        graphs = datagen.gen_erdos_renyi(d.num_graphs, d.max_nodes, (d.p_low, d.p_high), rng)
    frac = np.asarray(d.split, dtype=np.float64)
    if frac.shape != (3,) or np.any(frac < 0) or not np.isclose(frac.sum(), 1.0):
        raise CliError("[data] split must be three fractions summing to 1")
    cuts = np.round(np.cumsum(frac)[:2] * len(graphs)).astype(int)
    parts = np.split(np.arange(len(graphs)), cuts)
    for name, idx in zip(("train", "val", "test"), parts):
        write_graphs(out / f"{name}.graphs", [graphs[i] for i in idx])
    write_manifest(out / "manifest.json", {k: f"{k}.graphs" for k in ("train", "val", "test")})
    print(f"wrote {len(graphs)} graphs to {out}")


def cmd_train(args, cfg: C.Config, out: Path) -> None:
    train = _split(args, cfg, "train")
    stats = compute_stats(train)
    model = GraphTransformer(_denoiser_cfg(cfg), train[0].a, train[0].b, mode=cfg.model.mode, seed=args.seed)
    schedule = NoiseSchedule(cfg.noise.T, cfg.noise.s)
    rng = _rng(args.seed, 1)
    if cfg.model.mode == CONGRESS:
        trace = fit(train, ContinuousNoiseParams(schedule), model, cfg.train.steps, rng, cfg.train.batch_size,
                    _optim(cfg), cfg.train.log_every, step_fn=cg.congress_train_step)
    else:
        noise = DiscreteNoise.from_stats(schedule, cfg.noise.kind, stats)
        trace = fit(train, noise, model, cfg.train.steps, rng, cfg.train.batch_size, _optim(cfg),
                    cfg.train.log_every)
    save_model(out / "model.gdf", model, _noise_cfg(cfg), stats)
    (out / "losses.txt").write_text("".join(f"{v!r}\n" for v in trace))
    print(f"trained {cfg.train.steps} steps, final loss {trace[-1]:.4f}" if trace else "trained 0 steps")


def _need(args, name: str):
    v = getattr(args, name, None)
    if not v:
        raise CliError(f"--{name.replace('_', '-')} is required")
    return v


def cmd_sample(args, cfg: C.Config, out: Path) -> None:
    model, noise, stats, meta = load_model(_need(args, "checkpoint"))
    rng = _rng(args.seed, 2)
    count = cfg.sample.count
    n = _sample_size(cfg)
    if model.mode == CONGRESS:
        params = ContinuousNoiseParams(noise.schedule)
        sizes = stats.sample_n(rng, size=count) if n == "auto" else np.full(count, int(n))
        graphs = [None] * count
        for size in np.unique(sizes):
            idx = np.flatnonzero(sizes == size)
            for i, g in zip(idx, cg.congress_sample(int(size), model, params, rng, count=idx.size)):
                graphs[i] = g
    else:
        graphs = sample(n, model, noise, stats, rng, count=count, batch_size=cfg.sample.batch_size)
    write_graphs(out / "samples.graphs", graphs)
    print(f"wrote {len(graphs)} graphs to {out / 'samples.graphs'}")


def cmd_evaluate(args, cfg: C.Config, out: Path) -> None:
    generated = read_graphs(_need(args, "generated"))
    train, test = _split(args, cfg, "train"), _split(args, cfg, "test")
    report = metrics.evaluate_sets(generated, train, test, molecular=cfg.eval.molecular)
    if cfg.eval.n_boot:
        rng = _rng(args.seed if args.seed is not None else 0, 3)
        for d in metrics.DESCRIPTORS:
            _, lo, hi = metrics.bootstrap_ratio(generated, train, test, d, rng, cfg.eval.n_boot)
            report[f"mmd_ratio_{d}_ci_low"] = lo
            report[f"mmd_ratio_{d}_ci_high"] = hi
    text = "".join(f"{k} = {v!r}\n" for k, v in report.items())
    (out / "report.txt").write_text(text)
    sys.stdout.write(text)


def cmd_elbo(args, cfg: C.Config, out: Path) -> None:
    model, noise, stats, _ = load_model(_need(args, "checkpoint"))
    if model.mode == CONGRESS:
        raise CliError("the likelihood bound is defined for discrete models only")
    rng = _rng(args.seed, 4)
    graphs = _split(args, cfg, "test")
    lines, totals = [], []
    for i, g in enumerate(graphs):
        rep = elbo(g, model, noise, stats, n_mc=1, rng=rng)
        totals.append(rep.total)
        lines.append(f"graph {i}: " + " ".join(f"{k}={v!r}" for k, v in rep.as_dict().items()))
    lines.append(f"mean_elbo = {float(np.mean(totals))!r}")
    (out / "elbo.txt").write_text("\n".join(lines) + "\n")
    print(lines[-1])


def _targets(cfg: C.Config, graphs) -> np.ndarray:
    if cfg.guidance.property == "edge_count":
        return datagen.edge_count_targets(graphs)
    raise CliError(f"unknown property {cfg.guidance.property!r}")


def cmd_train_regressor(args, cfg: C.Config, out: Path) -> None:
    train = _split(args, cfg, "train")
    stats = compute_stats(train)
    y = _targets(cfg, train)
    rcfg = dataclasses.replace(_denoiser_cfg(cfg), n_layers=cfg.guidance.regressor_layers,
                               features=cfg.guidance.regressor_features)
    reg = Regressor(rcfg, train[0].a, train[0].b, y.shape[1], seed=args.seed)
    noise = DiscreteNoise.from_stats(NoiseSchedule(cfg.noise.T, cfg.noise.s), cfg.noise.kind, stats)
    trace = train_regressor(train, y, noise, reg, cfg.guidance.regressor_steps, _rng(args.seed, 5),
                            cfg.train.batch_size, _optim(cfg), cfg.train.log_every)
    save_regressor(out / "regressor.gdf", reg, _noise_cfg(cfg), stats)
    (out / "losses.txt").write_text("".join(f"{v!r}\n" for v in trace))
    print(f"trained regressor for {len(trace)} steps")


def cmd_guide(args, cfg: C.Config, out: Path) -> None:
    model, noise, stats, _ = load_model(_need(args, "checkpoint"))
    reg = load_regressor(_need(args, "regressor"))
    graphs = guided_sample(model, reg, cfg.guidance.target, cfg.guidance.scale, _sample_size(cfg), noise, stats,
                           _rng(args.seed, 6), count=cfg.sample.count, batch_size=cfg.sample.batch_size)
    write_graphs(out / "samples.graphs", graphs)
    print(f"wrote {len(graphs)} guided graphs to {out / 'samples.graphs'}")


def cmd_scaffold(args, cfg: C.Config, out: Path) -> None:
    model, noise, stats, _ = load_model(_need(args, "checkpoint"))
    scaffolds = read_graphs(_need(args, "scaffold_file"))
    if not scaffolds:
        raise CliError("scaffold file holds no graph")
    mask = ScaffoldMask(scaffolds[0])
    n = _sample_size(cfg)
    if n == "auto":
        n = max(stats.node_count_hist)
    graphs = sample(int(n), model, noise, stats, _rng(args.seed, 7), count=cfg.sample.count,
                    batch_size=cfg.sample.batch_size, scaffold=mask)
    write_graphs(out / "samples.graphs", graphs)
    print(f"wrote {len(graphs)} scaffolded graphs to {out / 'samples.graphs'}")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "sample": cmd_sample,
    "evaluate": cmd_evaluate,
    "elbo": cmd_elbo,
    "train-regressor": cmd_train_regressor,
    "guide": cmd_guide,
    "scaffold": cmd_scaffold,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphdiff", description="Discrete graph diffusion experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="experiment TOML file")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", required=True, help="run directory")
        s.add_argument("-v", "--verbose", action="store_true")
        if name in ("train", "train-regressor"):
            s.add_argument("--mode", choices=("digress", "congress"))
            s.add_argument("--transitions", choices=("uniform", "marginal"))
            s.add_argument("--features", choices=("none", "cycles", "spectral", "molecular", "all"))
        if name in ("sample", "elbo", "guide", "scaffold"):
            s.add_argument("--checkpoint")
        if name in ("sample", "guide", "scaffold"):
            s.add_argument("--count", type=int)
        if name == "guide":
            s.add_argument("--regressor")
            s.add_argument("--guidance-scale", type=float)
            s.add_argument("--target", help="comma-separated target values")
        if name == "scaffold":
            s.add_argument("--scaffold-file")
        if name == "evaluate":
            s.add_argument("--generated", help="graph file of generated samples")
    return p


def _thread_limit():
    raw = os.environ.get("GRAPHDIFF_THREADS")
    if not raw:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(raw)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in STOCHASTIC and (args.config is None or args.seed is None):
            raise CliError(f"{args.command} needs --config and --seed")
        cfg = _load_config(args)
        out = _start_run(args, cfg)
        with _thread_limit():
            COMMANDS[args.command](args, cfg, out)
    except (CliError, C.ConfigError, CheckpointError, GraphError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
