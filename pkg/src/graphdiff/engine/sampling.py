"""Reverse diffusion: posterior marginalisation and ancestral sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..denoiser import DenoiserOutput, GraphTransformer
from ..graph import DatasetStats, Graph, GraphError, SoftGraph, _one_hot, sample_categorical
from ..nn.tensor import no_grad
from ..noise import DiscreteNoise, posterior_table, sample_prior_arrays, sample_symmetric_edges


class InconsistentStateError(GraphError):
    pass


def _marginalize(z_t: np.ndarray, p_hat: np.ndarray, Q_t: np.ndarray, Qbar_prev: np.ndarray) -> np.ndarray:
    """sum_x q(z^{t-1} | x, z^t) p_hat(x), skipping x with q(z^t | x) = 0."""
    num = posterior_table(z_t, Q_t, Qbar_prev)  # (..., x, k)
    den = num.sum(-1)  # q(z^t | x)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(den > 0, p_hat / den, 0.0)
    out = (w[..., None] * num).sum(-2)
    total = out.sum(-1, keepdims=True)
    if np.any(total <= 0):
        raise InconsistentStateError("reverse distribution has zero mass")
    return out / total


def reverse_arrays(Xt: np.ndarray, Et: np.ndarray, pX: np.ndarray, pE: np.ndarray, t: int, noise: DiscreteNoise):
    """Batched p_theta(G^{t-1} | G^t) for stacked arrays."""
    if t < 1:
        raise ValueError("reverse step needs t >= 1")
    cur = noise.matrices(t)
    prev = noise.matrices(t - 1)
    rx = _marginalize(Xt, pX, cur.Q_X, prev.Qbar_X)
    n = Xt.shape[-2]
    re = np.zeros_like(pE)
    iu, ju = np.triu_indices(n, k=1)
    if iu.size:
        upper = _marginalize(Et[..., iu, ju, :], pE[..., iu, ju, :], cur.Q_E, prev.Qbar_E)
        re[..., iu, ju, :] = upper
        re[..., ju, iu, :] = upper
    re[..., np.arange(n), np.arange(n), 0] = 1.0
    return rx, re


def reverse_distributions(g_t: Graph, out, t: int, noise: DiscreteNoise) -> SoftGraph:
    """p_theta(G^{t-1} | G^t) for one graph. ``out`` is a DenoiserOutput or SoftGraph."""
    if isinstance(out, DenoiserOutput):
        out = out.soft(0)
    rx, re = reverse_arrays(g_t.X, g_t.E, out.X, out.E, t, noise)
    return SoftGraph(rx, re)


def collapse_arrays(pX: np.ndarray, pE: np.ndarray, rng: np.random.Generator):
    return _one_hot(sample_categorical(pX, rng), pX.shape[-1]), sample_symmetric_edges(pE, rng)


@dataclass
class ScaffoldMask:
    """Pins the first ``n_s`` nodes (and the edges among them) to a fixed subgraph."""

    scaffold: Graph

    @property
    def n_s(self) -> int:
        return self.scaffold.n

    def masks(self, n: int):
        if self.n_s > n:
            raise GraphError(f"scaffold has {self.n_s} nodes but the graph only {n}")
        mx = np.zeros((n, self.scaffold.a))
        mx[: self.n_s] = 1.0
        me = np.zeros((n, n, self.scaffold.b))
        me[: self.n_s, : self.n_s] = 1.0
        return mx, me

    def padded(self, n: int):
        xs = np.zeros((n, self.scaffold.a))
        xs[: self.n_s] = self.scaffold.X
        es = np.zeros((n, n, self.scaffold.b))
        es[: self.n_s, : self.n_s] = self.scaffold.E
        return xs, es

    def apply(self, X: np.ndarray, E: np.ndarray):
        """X <- M_X * X_S + (1 - M_X) * X, same for E."""
        n = X.shape[-2]
        mx, me = self.masks(n)
        xs, es = self.padded(n)
        return mx * xs + (1 - mx) * X, me * es + (1 - me) * E


def reverse_step(model: GraphTransformer, noise: DiscreteNoise, Xt, Et, t: int, rng, guidance=None, scaffold=None):
    bundle = model.featurize(Xt, Et, t, noise.T)
    with no_grad():
        out = model(Xt, Et, bundle)
    pX, pE = reverse_arrays(Xt, Et, out.X.data, out.E.data, t, noise)
    if guidance is not None:
        pX, pE = guidance.reweight(Xt, Et, pX, pE, t, noise.T)
    X, E = collapse_arrays(pX, pE, rng)
    if scaffold is not None:
        X, E = scaffold.apply(X, E)
    return X, E


def sample_batch(model: GraphTransformer, noise: DiscreteNoise, n: int, count: int, rng: np.random.Generator,
                 guidance=None, scaffold=None):
    """Ancestral sampling of ``count`` graphs of ``n`` nodes; returns stacked arrays."""
    X, E = sample_prior_arrays((count, n), noise.m_X, noise.m_E, rng)
    for t in range(noise.T, 0, -1):
        X, E = reverse_step(model, noise, X, E, t, rng, guidance, scaffold)
    return X, E


def sample(n_or_auto, model: GraphTransformer, noise: DiscreteNoise, stats: DatasetStats | None,
           rng: np.random.Generator, count: int = 1, batch_size: int = 256, guidance=None,
           scaffold=None) -> list[Graph]:
    """Sample ``count`` graphs. ``n_or_auto`` is a node count or ``"auto"``.

    With ``"auto"`` every graph draws its size from the training histogram.
    Output order follows the drawn sizes, not the batching.
    """
    if n_or_auto == "auto" or n_or_auto is None:
        sizes = np.atleast_1d(stats.sample_n(rng, size=count))
    else:
        sizes = np.full(count, int(n_or_auto))
    out: list[Graph | None] = [None] * count
    for n in np.unique(sizes):
        idx = np.flatnonzero(sizes == n)
        for s in range(0, idx.size, batch_size):
            chunk = idx[s : s + batch_size]
            X, E = sample_batch(model, noise, int(n), chunk.size, rng, guidance, scaffold)
            for k, i in enumerate(chunk):
                out[i] = Graph(X[k], E[k])
    return out


def scaffold_sample(model: GraphTransformer, mask: ScaffoldMask, n: int, noise: DiscreteNoise,
                    rng: np.random.Generator, count: int = 1) -> list[Graph]:
    return sample(n, model, noise, None, rng, count=count, scaffold=mask)
