"""Variational bound on log p(G) and an exact likelihood for tiny graphs."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..denoiser import GraphTransformer
from ..graph import DatasetStats, Graph, _one_hot
from ..nn.tensor import no_grad
from ..noise import DiscreteNoise, posterior_table
from .sampling import reverse_arrays

MAX_STATES = 1 << 14


@dataclass
class ElboReport:
    """Terms of the bound, in nats. ``diffusion[k]`` is L_t for t = k + 2."""

    log_pn: float
    prior: float
    diffusion: list[float] = field(default_factory=list)
    reconstruction: float = 0.0

    @property
    def total(self) -> float:
        return self.log_pn - self.prior - math.fsum(self.diffusion) + self.reconstruction

    def as_dict(self) -> dict:
        return {
            "log_pn": self.log_pn,
            "prior": self.prior,
            "diffusion_sum": math.fsum(self.diffusion),
            "reconstruction": self.reconstruction,
            "elbo": self.total,
        }


def kl_categorical(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """KL(q || p) along the last axis; 0 log 0 = 0, q > 0 = p gives +inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, q * (np.log(q) - np.log(p)), 0.0)
    return terms.sum(-1)


def _upper(E: np.ndarray) -> np.ndarray:
    n = E.shape[-2]
    iu, ju = np.triu_indices(n, k=1)
    return E[..., iu, ju, :]


def true_posterior(X, E, Xt, Et, t: int, noise: DiscreteNoise):
    """q(G^{t-1} | G^t, G) per node and per upper pair, batched over G^t."""
    cur, prev = noise.matrices(t), noise.matrices(t - 1)

    def pick(z, x, Q, Qb):
        num = (posterior_table(z, Q, Qb) * x[..., :, None]).sum(-2)
        return num / num.sum(-1, keepdims=True)

    return pick(Xt, X, cur.Q_X, prev.Qbar_X), pick(_upper(Et), _upper(E), cur.Q_E, prev.Qbar_E)


def _model_reverse(model: GraphTransformer, Xt, Et, t: int, noise: DiscreteNoise):
    bundle = model.featurize(Xt, Et, t, noise.T)
    with no_grad():
        out = model(Xt, Et, bundle)
    return reverse_arrays(Xt, Et, out.X.data, out.E.data, t, noise)


def _step_kl(g: Graph, Xt, Et, t: int, model, noise) -> np.ndarray:
    """Per-sample KL[q(G^{t-1}|G^t,G) || p_theta(G^{t-1}|G^t)] for stacked G^t."""
    qx, qe = true_posterior(g.X, g.E, Xt, Et, t, noise)
    px, pe = _model_reverse(model, Xt, Et, t, noise)
    return kl_categorical(qx, px).sum(-1) + kl_categorical(qe, _upper(pe)).sum(-1)


def _log_recon(g: Graph, Xt, Et, model, noise) -> np.ndarray:
    px, pe = _model_reverse(model, Xt, Et, 1, noise)
    with np.errstate(divide="ignore"):
        lx = np.log((px * g.X).sum(-1)).sum(-1)
        le = np.log((_upper(pe) * _upper(g.E)).sum(-1)).sum(-1)
    return lx + le


def _prior_kl(g: Graph, noise: DiscreteNoise) -> float:
    px, pe = noise.noisy_probs(g.X, g.E, noise.T)
    kx = kl_categorical(px, noise.m_X).sum()
    ke = kl_categorical(_upper(pe), noise.m_E).sum()
    return float(kx + ke)


def enumerate_states(n: int, a: int, b: int):
    """Every graph on ``n`` nodes as stacked one-hot arrays, in a fixed order."""
    n_pairs = n * (n - 1) // 2
    count = a**n * b**n_pairs
    if count > MAX_STATES:
        raise ValueError(f"{count} states is too many to enumerate (limit {MAX_STATES})")
    iu, ju = np.triu_indices(n, k=1)
    xs, es = [], []
    for labels in itertools.product(range(a), repeat=n):
        for pairs in itertools.product(range(b), repeat=n_pairs):
            le = np.zeros((n, n), dtype=np.int64)
            le[iu, ju] = pairs
            le[ju, iu] = pairs
            xs.append(_one_hot(np.array(labels, dtype=np.int64), a))
            es.append(_one_hot(le, b))
    return np.stack(xs), np.stack(es)


def _state_probs(X, E, probs_x, probs_e) -> np.ndarray:
    """Probability of each enumerated state under independent node/edge factors."""
    lx = (X * probs_x).sum(-1).prod(-1)
    le = (_upper(E) * _upper(probs_e)).sum(-1).prod(-1)
    return lx * le


def elbo(g: Graph, model: GraphTransformer, noise: DiscreteNoise, stats: DatasetStats,
         n_mc: int = 1, rng: np.random.Generator | None = None, exact: bool = False) -> ElboReport:
    """Lower bound log p(n) - prior - sum_{t>=2} L_t + reconstruction.

    With ``exact=True`` the expectations over G^t are computed by enumerating all
    graphs of size n (tiny systems only); otherwise each L_t and the reconstruction
    use ``n_mc`` samples of G^t.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    T = noise.T
    log_pn = stats.log_prob_n(g.n)
    prior = _prior_kl(g, noise)
    diffusion = []
    if exact:
        SX, SE = enumerate_states(g.n, g.a, g.b)

        def expect(t, fn):
            px, pe = noise.noisy_probs(g.X, g.E, t)
            w = _state_probs(SX, SE, px, pe)
            keep = w > 0
            vals = fn(SX[keep], SE[keep])
            return float(math.fsum(w[keep] * vals))
    else:
        rng = rng if rng is not None else np.random.default_rng()

        def expect(t, fn):
            X = np.broadcast_to(g.X, (n_mc,) + g.X.shape)
            E = np.broadcast_to(g.E, (n_mc,) + g.E.shape)
            Xt, Et = noise.sample_noisy(X, E, t, rng)
            return float(np.mean(fn(Xt, Et)))

    for t in range(2, T + 1):
        diffusion.append(expect(t, lambda Xt, Et, t=t: _step_kl(g, Xt, Et, t, model, noise)))
    recon = expect(1, lambda Xt, Et: _log_recon(g, Xt, Et, model, noise))
    return ElboReport(log_pn, prior, diffusion, recon)


def exact_log_likelihood(g: Graph, model: GraphTransformer, noise: DiscreteNoise, stats: DatasetStats) -> float:
    """log p_theta(G) by summing over every trajectory G^T, ..., G^1.

    Propagates the marginal over enumerated states backwards in time, which is
    the same sum as enumerating all trajectories explicitly.
    """
    SX, SE = enumerate_states(g.n, g.a, g.b)
    m_x = np.broadcast_to(noise.m_X, g.X.shape)
    m_e = np.broadcast_to(noise.m_E, g.E.shape)
    v = _state_probs(SX, SE, m_x, m_e)
    for t in range(noise.T, 0, -1):
        rx, re = _model_reverse(model, SX, SE, t, noise)
        # P[s, s'] = p_theta(G^{t-1} = s' | G^t = s)
        P = np.stack([_state_probs(SX, SE, rx[s], re[s]) for s in range(len(SX))])
        v = v @ P
    idx = np.flatnonzero(
        np.all(SX == g.X, axis=(1, 2)) & np.all(SE == g.E, axis=(1, 2, 3))
    )
    p = v[idx[0]]
    return stats.log_prob_n(g.n) + (math.log(p) if p > 0 else float("-inf"))
