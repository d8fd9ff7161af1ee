"""Gaussian-noise baseline sharing the denoiser architecture.

The network predicts the injected noise (eps_X, eps_E). Edge noise is
symmetric with a zero diagonal, so only pairs i < j enter the loss.
"""

from __future__ import annotations

import numpy as np

from ..denoiser import CONGRESS, GraphTransformer, upper_mask
from ..graph import Graph, _one_hot
from ..nn import ops
from ..nn.tensor import Tensor, no_grad
from ..noise import ContinuousNoiseParams, offdiag_mask, symmetric_normal, vp_params
from .training import OptimConfig, group_by_size, stack


def _check_mode(model: GraphTransformer) -> None:
    if model.mode != CONGRESS:
        raise ValueError("model is not in continuous (noise-prediction) mode")


def noise_arrays(X: np.ndarray, E: np.ndarray, ts, params: ContinuousNoiseParams, rng: np.random.Generator):
    """z^t = alpha_t G + sigma_t eps for a stack, one t per graph."""
    ts = np.asarray(ts)
    a = params.alpha[ts][:, None, None]
    s = params.sigma[ts][:, None, None]
    eps_x = rng.standard_normal(X.shape)
    eps_e = symmetric_normal(E.shape, rng)
    E = E * offdiag_mask(X.shape[-2])[..., None]
    return a * X + s * eps_x, a[..., None] * E + s[..., None] * eps_e, eps_x, eps_e


def congress_loss(out, eps_x: np.ndarray, eps_e: np.ndarray) -> Tensor:
    """Squared error summed over nodes and upper pairs."""
    n = eps_x.shape[-2]
    dx = ops.sub(out.X, Tensor(eps_x))
    de = ops.sub(out.E, Tensor(eps_e))
    de = ops.mul(ops.square(de), np.ascontiguousarray(np.broadcast_to(upper_mask(n)[..., None], de.shape)))
    parts = [ops.reshape(ops.square(dx), (-1,)), ops.reshape(de, (-1,))]
    return ops.sum_exact(ops.concat(parts, axis=0))


def congress_train_step(graphs, params: ContinuousNoiseParams, model: GraphTransformer,
                        rng: np.random.Generator, optim: OptimConfig | None = None) -> float:
    """One step of noise regression; returns the summed squared error."""
    _check_mode(model)
    if isinstance(graphs, Graph):
        graphs = [graphs]
    optim = optim or OptimConfig()
    model.store.zero_grad()
    total = 0.0
    for group in group_by_size(graphs):
        X, E = stack(group)
        ts = rng.integers(1, params.T + 1, size=len(group))
        zx, ze, eps_x, eps_e = noise_arrays(X, E, ts, params, rng)
        out = model(zx, ze, model.featurize(zx, ze, ts, params.T))
        l = congress_loss(out, eps_x, eps_e)
        l.backward()
        total += l.item()
    optim.step(model.store)
    return total


def congress_reverse_step(zx: np.ndarray, ze: np.ndarray, eps_hat_x: np.ndarray, eps_hat_e: np.ndarray,
                          t: int, params: ContinuousNoiseParams, rng: np.random.Generator):
    """z^{t-1} = z^t / a_{t|t-1} - s^2_{t|t-1} / (a_{t|t-1} s_t) eps_hat + s_{t->t-1} eps."""
    step = vp_params(t, params)
    c = step.sigma_cond**2 / (step.alpha_cond * step.sigma)
    mx = zx / step.alpha_cond - c * eps_hat_x
    me = ze / step.alpha_cond - c * eps_hat_e
    if step.sigma_post > 0:
        mx = mx + step.sigma_post * rng.standard_normal(zx.shape)
        me = me + step.sigma_post * symmetric_normal(ze.shape, rng)
    return mx, me * offdiag_mask(zx.shape[-2])[..., None]


def _argmax_graph(zx: np.ndarray, ze: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = zx.shape[-2]
    xl = zx.argmax(-1)
    iu, ju = np.triu_indices(n, k=1)
    el = np.zeros(ze.shape[:-1], dtype=np.int64)
    upper = ze[..., iu, ju, :].argmax(-1)
    el[..., iu, ju] = upper
    el[..., ju, iu] = upper
    return _one_hot(xl, zx.shape[-1]), _one_hot(el, ze.shape[-1])


def congress_sample_batch(model: GraphTransformer, params: ContinuousNoiseParams, n: int, count: int,
                          rng: np.random.Generator):
    """Gaussian prior, T reverse iterations, argmax per node and pair."""
    _check_mode(model)
    zx = rng.standard_normal((count, n, model.a))
    ze = symmetric_normal((count, n, n, model.b), rng)
    for t in range(params.T, 0, -1):
        with no_grad():
            out = model(zx, ze, model.featurize(zx, ze, t, params.T))
        zx, ze = congress_reverse_step(zx, ze, out.X.data, out.E.data, t, params, rng)
    return _argmax_graph(zx, ze)


def congress_sample(n: int, model: GraphTransformer, params: ContinuousNoiseParams, rng: np.random.Generator,
                    count: int = 1, batch_size: int = 256) -> list[Graph]:
    out = []
    for s in range(0, count, batch_size):
        X, E = congress_sample_batch(model, params, n, min(batch_size, count - s), rng)
        out.extend(Graph(x, e) for x, e in zip(X, E))
    return out
