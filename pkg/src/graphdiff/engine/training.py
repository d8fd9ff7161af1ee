"""Denoiser training loop."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..denoiser import GraphTransformer, loss
from ..graph import Graph
from ..nn.params import adamlike_step, clip_grad_norm, sgd_step
from ..noise import DiscreteNoise

log = logging.getLogger(__name__)


@dataclass
class OptimConfig:
    lr: float = 2e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    grad_clip: float = 0.0

    def step(self, store) -> None:
        if self.grad_clip:
            clip_grad_norm(store, self.grad_clip)
        if self.optimizer == "adam":
            adamlike_step(store, self.lr, self.beta1, self.beta2)
        elif self.optimizer == "sgd":
            sgd_step(store, self.lr)
        else:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def stack(graphs: list[Graph]):
    return np.stack([g.X for g in graphs]), np.stack([g.E for g in graphs])


def group_by_size(graphs):
    groups = defaultdict(list)
    for g in graphs:
        groups[g.n].append(g)
    return [groups[k] for k in sorted(groups)]


def train_step(graphs, noise: DiscreteNoise, model: GraphTransformer, rng: np.random.Generator,
               optim: OptimConfig | None = None) -> float:
    """One optimizer step on a graph or a batch; returns the summed loss.

    Each graph gets its own t ~ U{1..T}; graphs of equal size share a forward pass
    and gradients of the size groups are summed before the update.
    """
    if isinstance(graphs, Graph):
        graphs = [graphs]
    optim = optim or OptimConfig()
    model.store.zero_grad()
    total = 0.0
    for group in group_by_size(graphs):
        X, E = stack(group)
        ts = rng.integers(1, noise.T + 1, size=len(group))
        Xt, Et = noise.sample_noisy_per_graph(X, E, ts, rng)
        bundle = model.featurize(Xt, Et, ts, noise.T)
        out = model(Xt, Et, bundle)
        l = loss(out, X, E, model.cfg.lam)
        l.backward()
        total += l.item()
    optim.step(model.store)
    return total


def epoch_batches(n_items: int, batch_size: int, rng: np.random.Generator):
    """Yield index batches forever, reshuffling at the start of each epoch."""
    while True:
        order = rng.permutation(n_items)
        for s in range(0, n_items, batch_size):
            yield order[s : s + batch_size]


def fit(dataset: list[Graph], noise: DiscreteNoise, model: GraphTransformer, steps: int,
        rng: np.random.Generator, batch_size: int = 1, optim: OptimConfig | None = None,
        log_every: int = 0, callback=None, step_fn=None) -> list[float]:
    """Train for ``steps`` optimizer steps; returns the per-step loss trace.

    ``step_fn`` defaults to ``train_step``; the continuous variant passes its own.
    """
    step_fn = step_fn or train_step
    trace = []
    batches = epoch_batches(len(dataset), batch_size, rng)
    for step in range(steps):
        idx = next(batches)
        trace.append(step_fn([dataset[i] for i in idx], noise, model, rng, optim))
        if log_every and (step + 1) % log_every == 0:
            log.info("step %d loss %.4f", step + 1, np.mean(trace[-log_every:]))
        if callback is not None:
            callback(step, trace)
    return trace
