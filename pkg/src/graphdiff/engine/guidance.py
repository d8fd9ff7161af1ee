"""Regressor guidance: steer reverse steps toward a graph-level target."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..denoiser import DenoiserConfig, GraphTransformer
from ..graph import DatasetStats, Graph
from ..nn import ops
from ..nn.tensor import Tensor, backward, no_grad
from ..noise import DiscreteNoise
from .sampling import sample
from .training import OptimConfig, epoch_batches, group_by_size, stack

log = logging.getLogger(__name__)


class GuidanceError(ValueError):
    pass


class Regressor:
    """Graph transformer with a graph-level head predicting ``k`` targets.

    Targets are standardised with the training mean and scale; ``predict`` and
    gradients are in the original units.
    """

    def __init__(self, cfg: DenoiserConfig, a: int, b: int, k: int, seed: int = 0, table=None):
        self.net = GraphTransformer(cfg, a, b, out_y=k, seed=seed, table=table)
        self.k = k
        self.y_mean = np.zeros(k)
        self.y_scale = np.ones(k)

    @property
    def store(self):
        return self.net.store

    def fit_scaling(self, targets: np.ndarray) -> None:
        targets = np.asarray(targets, dtype=np.float64).reshape(-1, self.k)
        self.y_mean = targets.mean(0)
        sd = targets.std(0)
        self.y_scale = np.where(sd > 1e-12, sd, 1.0)

    def forward(self, X, E, t, T: int) -> Tensor:
        """Standardised prediction (B, k); X and E may be Tensors."""
        Xd = X.data if isinstance(X, Tensor) else X
        Ed = E.data if isinstance(E, Tensor) else E
        bundle = self.net.featurize(Xd, Ed, t, T)
        return self.net(X, E, bundle).y

    def predict(self, X: np.ndarray, E: np.ndarray, t, T: int) -> np.ndarray:
        with no_grad():
            out = self.forward(X, E, t, T).data
        if not np.all(np.isfinite(out)):
            raise GuidanceError("regressor output is not finite")
        return self.y_mean + self.y_scale * out

    def predict_graph(self, g: Graph, t: int = 0, T: int = 1) -> np.ndarray:
        return self.predict(g.X[None], g.E[None], t, T)[0]


def _mse(pred: Tensor, target: np.ndarray) -> Tensor:
    diff = ops.sub(pred, Tensor(target))
    return ops.reduce_mean(ops.square(diff))


def regressor_step(graphs: list[Graph], targets: np.ndarray, noise: DiscreteNoise, reg: Regressor,
                   rng: np.random.Generator, optim: OptimConfig | None = None) -> float:
    """One step of mean-squared error on noisy inputs; returns the mean loss."""
    optim = optim or OptimConfig()
    reg.store.zero_grad()
    targets = (np.asarray(targets, dtype=np.float64).reshape(len(graphs), reg.k) - reg.y_mean) / reg.y_scale
    index = {id(g): i for i, g in enumerate(graphs)}
    total = 0.0
    for group in group_by_size(graphs):
        X, E = stack(group)
        ys = targets[[index[id(g)] for g in group]]
        ts = rng.integers(1, noise.T + 1, size=len(group))
        Xt, Et = noise.sample_noisy_per_graph(X, E, ts, rng)
        pred = reg.forward(Xt, Et, ts, noise.T)
        l = ops.scale(_mse(pred, ys), len(group) / len(graphs))
        l.backward()
        total += l.item()
    optim.step(reg.store)
    return total


def train_regressor(dataset: list[Graph], targets, noise: DiscreteNoise, reg: Regressor, steps: int,
                    rng: np.random.Generator, batch_size: int = 16, optim: OptimConfig | None = None,
                    log_every: int = 0) -> list[float]:
    """Train ``reg`` to predict ``targets`` from noised graphs; returns the loss trace.

    The trace is in standardised units.
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(len(dataset), -1)
    if not np.all(np.isfinite(targets)):
        raise ValueError("targets must be finite")
    if targets.shape[1] != reg.k:
        raise ValueError(f"targets have dimension {targets.shape[1]}, regressor expects {reg.k}")
    reg.fit_scaling(targets)
    trace = []
    batches = epoch_batches(len(dataset), batch_size, rng)
    for step in range(steps):
        idx = next(batches)
        trace.append(regressor_step([dataset[i] for i in idx], targets[idx], noise, reg, rng, optim))
        if log_every and (step + 1) % log_every == 0:
            log.info("regressor step %d loss %.4f", step + 1, np.mean(trace[-log_every:]))
    return trace


@dataclass
class Guidance:
    """Multiplies reverse distributions by exp(-scale * grad ||y_hat - y||^2).

    The gradient is taken with respect to the one-hot G^t fed to the regressor.
    An edge variable appears twice in E (ij and ji), so its weight uses the sum
    of both gradient entries.
    """

    regressor: Regressor
    target: np.ndarray
    scale: float

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=np.float64).reshape(-1)
        if self.target.size != self.regressor.k:
            raise GuidanceError(f"target has {self.target.size} entries, regressor predicts {self.regressor.k}")

    def gradients(self, Xt: np.ndarray, Et: np.ndarray, t: int, T: int):
        reg = self.regressor
        X = Tensor(Xt, requires_grad=True)
        E = Tensor(Et, requires_grad=True)
        pred = reg.forward(X, E, t, T)
        y = (self.target - reg.y_mean) / reg.y_scale
        # ||y_hat - y||^2 in original units
        err = ops.mul(ops.sub(pred, Tensor(np.broadcast_to(y, pred.shape).copy())), reg.y_scale)
        backward(ops.reduce_sum(ops.square(err)))
        gx, ge = X.grad, E.grad
        reg.store.zero_grad()
        if gx is None or ge is None or not (np.all(np.isfinite(gx)) and np.all(np.isfinite(ge))):
            raise GuidanceError(f"non-finite guidance gradient at t={t}")
        return gx, ge + np.swapaxes(ge, -2, -3)

    def reweight(self, Xt, Et, pX, pE, t: int, T: int):
        if self.scale == 0:
            return pX, pE
        gx, ge = self.gradients(Xt, Et, t, T)
        return _tilt(pX, gx, self.scale), _tilt(pE, ge, self.scale)


def _tilt(p: np.ndarray, grad: np.ndarray, scale: float) -> np.ndarray:
    s = -scale * grad
    # shift by the max over the support so a large tilt cannot underflow every live class
    shift = np.where(p > 0, s, -np.inf).max(-1, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        w = np.where(p > 0, p * np.exp(s - shift), 0.0)
    total = w.sum(-1, keepdims=True)
    if np.any(total <= 0):
        raise GuidanceError("guided distribution has zero mass")
    return w / total


def guided_sample(model: GraphTransformer, reg: Regressor, target, guidance_scale: float, n_or_auto,
                  noise: DiscreteNoise, stats: DatasetStats | None, rng: np.random.Generator,
                  count: int = 1, batch_size: int = 256) -> list[Graph]:
    guide = Guidance(reg, target, guidance_scale)
    return sample(n_or_auto, model, noise, stats, rng, count=count, batch_size=batch_size, guidance=guide)
