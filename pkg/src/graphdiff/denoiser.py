"""Graph transformer denoiser.

Node, edge and graph-level channels are updated jointly in each layer:
attention scores come from query/key products, are modulated by the edge
channel and then the graph channel (FiLM), drive a softmax over neighbours
for the node update, and are projected into the new edge channel. Graph
features are refreshed from PNA pooling of the new node and edge channels.

All tensors carry a leading batch axis of equal-size graphs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import features as F
from .graph import Graph, SoftGraph, _one_hot
from .nn import ops
from .nn.params import MLP, LayerNorm, Linear, ParamStore
from .nn.tensor import ShapeError, Tensor

DIGRESS = "digress"
CONGRESS = "congress"


@dataclass
class DenoiserConfig:
    n_layers: int = 4
    hidden_x: int = 64
    hidden_e: int = 32
    hidden_y: int = 16
    heads: int = 4
    ff_x: int = 128
    ff_e: int = 64
    ff_y: int = 32
    lam: float = 5.0
    features: frozenset = field(default_factory=lambda: frozenset({F.CYCLES}))

    def __post_init__(self):
        self.features = F.parse_flags(self.features)
        if self.hidden_x % self.heads:
            raise ValueError(f"hidden_x={self.hidden_x} not divisible by heads={self.heads}")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


def symmetrize(e: Tensor) -> Tensor:
    return ops.scale(ops.add(e, ops.swap_nodes(e)), 0.5)


def expand_graph(y: Tensor, like_shape) -> Tensor:
    """Broadcast (B, d) graph features over the node axes of ``like_shape``."""
    B, d = y.shape
    mid = len(like_shape) - 2
    return ops.expand(ops.reshape(y, (B,) + (1,) * mid + (d,)), tuple(like_shape[:-1]) + (d,))


def expand_nodes(x: Tensor, axis: int) -> Tensor:
    """(B, n, d) -> (B, n, n, d) repeated along ``axis`` (1 = rows vary with j)."""
    B, n, d = x.shape
    shape = (B, 1, n, d) if axis == 1 else (B, n, 1, d)
    return ops.expand(ops.reshape(x, shape), (B, n, n, d))


class FiLM:
    """FiLM(cond, target) = cond W1 + (cond W2) * target + target."""

    def __init__(self, store: ParamStore, name: str, d_cond: int, d_target: int):
        self.add = Linear(store, f"{name}.add", d_cond, d_target, bias=False)
        self.mul = Linear(store, f"{name}.mul", d_cond, d_target, bias=False)

    def __call__(self, cond: Tensor, target: Tensor) -> Tensor:
        return film(cond, target, self.add.W, self.mul.W)


def film(M1: Tensor, M2: Tensor, W1, W2) -> Tensor:
    M1, M2 = ops.as_tensor(M1), ops.as_tensor(M2)
    a = ops.matmul(M1, W1)
    m = ops.matmul(M1, W2)
    if a.shape != M2.shape:
        raise ShapeError(f"film: conditioned shape {a.shape} does not match target {M2.shape}")
    return ops.add(ops.add(a, ops.mul(m, M2)), M2)


def pna_stats(X: Tensor, axis: int = 1) -> Tensor:
    """cat(max, min, mean, std) along ``axis`` (std is the population one)."""
    return ops.concat(
        [ops.reduce_max(X, axis), ops.reduce_min(X, axis), ops.reduce_mean(X, axis), ops.reduce_std(X, axis)],
        axis=-1,
    )


class PNA:
    def __init__(self, store, name, d_in, d_out):
        self.lin = Linear(store, name, 4 * d_in, d_out)
        self.d_in = d_in

    def __call__(self, X: Tensor) -> Tensor:
        if X.shape[1] == 0:
            stats = Tensor(np.zeros((X.shape[0], 4 * self.d_in)))
        else:
            stats = pna_stats(X, axis=1)
        return self.lin(stats)


def upper_pairs(E: Tensor) -> Tensor:
    """(B, n, n, d) -> (B, n(n-1)/2, d) over unordered pairs i < j."""
    B, n, _, d = E.shape
    iu, ju = np.triu_indices(n, k=1)
    flat = ops.reshape(E, (B, n * n, d))
    return ops.take(flat, iu * n + ju, axis=1)


class TransformerLayer:
    def __init__(self, store: ParamStore, name: str, cfg: DenoiserConfig, zero_out: bool = False):
        dx, de, dy = cfg.hidden_x, cfg.hidden_e, cfg.hidden_y
        self.df = dx // cfg.heads
        self.q = Linear(store, f"{name}.q", dx, dx)
        self.k = Linear(store, f"{name}.k", dx, dx)
        self.v = Linear(store, f"{name}.v", dx, dx)
        self.film_e = FiLM(store, f"{name}.film_e", de, dx)
        self.film_y_att = FiLM(store, f"{name}.film_y_att", dy, dx)
        self.film_y_x = FiLM(store, f"{name}.film_y_x", dy, dx)
        self.film_y_e = FiLM(store, f"{name}.film_y_e", dy, de)
        self.e_proj = Linear(store, f"{name}.e_proj", dx, de)
        self.x_out = Linear(store, f"{name}.x_out", dx, dx, zero=zero_out)
        self.e_out = Linear(store, f"{name}.e_out", de, de, zero=zero_out)
        self.y_self = Linear(store, f"{name}.y_self", dy, dy)
        self.pna_x = PNA(store, f"{name}.pna_x", dx, dy)
        self.pna_e = PNA(store, f"{name}.pna_e", de, dy)
        self.y_out = Linear(store, f"{name}.y_out", dy, dy, zero=zero_out)
        self.norm_x1 = LayerNorm(store, f"{name}.norm_x1", dx)
        self.norm_e1 = LayerNorm(store, f"{name}.norm_e1", de)
        self.norm_y1 = LayerNorm(store, f"{name}.norm_y1", dy)
        self.ff_x = _FF(store, f"{name}.ff_x", dx, cfg.ff_x, zero_out)
        self.ff_e = _FF(store, f"{name}.ff_e", de, cfg.ff_e, zero_out)
        self.ff_y = _FF(store, f"{name}.ff_y", dy, cfg.ff_y, zero_out)
        self.norm_x2 = LayerNorm(store, f"{name}.norm_x2", dx)
        self.norm_e2 = LayerNorm(store, f"{name}.norm_e2", de)
        self.norm_y2 = LayerNorm(store, f"{name}.norm_y2", dy)

    def attention(self, X: Tensor, E: Tensor, y: Tensor):
        B, n, dx = X.shape
        Q, K, V = self.q(X), self.k(X), self.v(X)
        scores = ops.scale(ops.mul(expand_nodes(Q, 2), expand_nodes(K, 1)), 1.0 / np.sqrt(self.df))
        scores = self.film_e(E, scores)
        scores = self.film_y_att(expand_graph(y, scores.shape), scores)

        attn = ops.softmax(scores, axis=2)
        new_x = ops.reduce_sum(ops.mul(attn, expand_nodes(V, 1)), axis=2)
        new_x = self.x_out(self.film_y_x(expand_graph(y, new_x.shape), new_x))

        new_e = symmetrize(self.e_proj(scores))
        new_e = self.e_out(self.film_y_e(expand_graph(y, new_e.shape), new_e))

        new_y = ops.add(ops.add(self.y_self(y), self.pna_x(new_x)), self.pna_e(upper_pairs(new_e)))
        new_y = self.y_out(new_y)
        return new_x, new_e, new_y

    def __call__(self, X, E, y):
        new_x, new_e, new_y = self.attention(X, E, y)
        X = self.norm_x1(ops.add(X, new_x))
        E = self.norm_e1(ops.add(E, new_e))
        y = self.norm_y1(ops.add(y, new_y))
        X = self.norm_x2(ops.add(X, self.ff_x(X)))
        E = self.norm_e2(ops.add(E, self.ff_e(E)))
        y = self.norm_y2(ops.add(y, self.ff_y(y)))
        return X, E, y


class _FF:
    def __init__(self, store, name, d, hidden, zero_out):
        self.l1 = Linear(store, f"{name}.0", d, hidden)
        self.l2 = Linear(store, f"{name}.1", hidden, d, zero=zero_out)

    def __call__(self, x):
        return self.l2(ops.relu(self.l1(x)))


def squash(x: np.ndarray) -> np.ndarray:
    """sign(x) * log(1 + |x|): keeps cycle counts of dense graphs in range."""
    return np.sign(x) * np.log1p(np.abs(x))


@dataclass
class DenoiserOutput:
    """Predicted clean-graph distributions (discrete mode) or noise (continuous mode)."""

    X: Tensor
    E: Tensor
    y: Tensor | None = None

    def soft(self, index: int = 0) -> SoftGraph:
        return SoftGraph(self.X.data[index], self.E.data[index])


class GraphTransformer:
    """Denoiser (discrete or continuous mode) or regressor (``out_y > 0``)."""

    def __init__(self, cfg: DenoiserConfig, a: int, b: int, mode: str = DIGRESS, out_y: int = 0,
                 seed: int = 0, table: F.MoleculeTable | None = None):
        self.cfg = cfg
        self.a, self.b = a, b
        self.mode = mode
        self.out_y = out_y
        self.table = table
        self.store = ParamStore(seed)
        s = self.store
        k_n, k_y = F.feature_dims(cfg.features)
        dx, de, dy = cfg.hidden_x, cfg.hidden_e, cfg.hidden_y
        self.in_x = MLP(s, "in_x", [a + k_n, dx, dx], final_act=True)
        self.in_e = MLP(s, "in_e", [b, de, de], final_act=True)
        self.in_y = MLP(s, "in_y", [k_y, dy, dy], final_act=True)
        self.layers = [TransformerLayer(s, f"layer{i}", cfg) for i in range(cfg.n_layers)]
        if out_y:
            self.out_head = MLP(s, "out_y", [dy, dy, out_y])
        else:
            self.out_x = MLP(s, "out_x", [dx, dx, a])
            self.out_e = MLP(s, "out_e", [de, de, b])

    def featurize(self, X: np.ndarray, E: np.ndarray, t, T: int) -> F.FeatureBundle:
        """Features of (discretised) graphs; continuous inputs are argmax-projected."""
        if self.mode == CONGRESS:
            X, E = _discretize(X, E)
        return F.assemble_arrays(X, E, t, T, self.cfg.features, self.table)

    def forward(self, X, E, bundle: F.FeatureBundle) -> DenoiserOutput:
        """Batched forward. ``X`` (B, n, a) and ``E`` (B, n, n, b) may be Tensors."""
        Xt, Et = ops.as_tensor(X), ops.as_tensor(E)
        if Xt.ndim != 3 or Et.ndim != 4 or Et.shape[:3] != Xt.shape[:2] + Xt.shape[1:2]:
            raise ShapeError(f"denoiser: bad input shapes {Xt.shape}, {Et.shape}")
        B, n, _ = Xt.shape
        nf = Tensor(squash(bundle.node_feats).reshape(B, n, -1))
        gf = Tensor(squash(bundle.graph_feats).reshape(B, -1))
        h_x = self.in_x(ops.concat([Xt, nf], axis=-1) if nf.shape[-1] else Xt)
        h_e = symmetrize(self.in_e(Et))
        h_y = self.in_y(gf)
        for layer in self.layers:
            h_x, h_e, h_y = layer(h_x, h_e, h_y)
        if self.out_y:
            return DenoiserOutput(Xt, Et, self.out_head(h_y))
        off = np.broadcast_to((1.0 - np.eye(n))[None, :, :, None], (B, n, n, self.b)).copy()
        if self.mode == CONGRESS:
            eps_x = self.out_x(h_x)
            eps_e = ops.mul(symmetrize(self.out_e(h_e)), off)
            return DenoiserOutput(eps_x, eps_e)
        logit_x = ops.add(self.out_x(h_x), Xt)
        logit_e = symmetrize(ops.add(self.out_e(h_e), Et))
        p_x = ops.softmax(logit_x, axis=-1)
        p_e = ops.softmax(logit_e, axis=-1)
        diag = np.zeros((B, n, n, self.b))
        diag[:, np.arange(n), np.arange(n), 0] = 1.0
        p_e = ops.add(ops.mul(p_e, off), diag)
        return DenoiserOutput(p_x, p_e)

    __call__ = forward


def _discretize(X: np.ndarray, E: np.ndarray):
    X = np.asarray(X.data if isinstance(X, Tensor) else X)
    E = np.asarray(E.data if isinstance(E, Tensor) else E)
    xl = X.argmax(-1)
    el = E.argmax(-1)
    n = X.shape[-2]
    el[..., np.arange(n), np.arange(n)] = 0
    return _one_hot(xl, X.shape[-1]), _one_hot(el, E.shape[-1])


def denoiser_forward(model: GraphTransformer, g: Graph, t: int, T: int) -> DenoiserOutput:
    """Single-graph convenience wrapper around ``model.forward``."""
    X, E = g.X[None], g.E[None]
    return model.forward(X, E, model.featurize(X, E, t, T))


def upper_mask(n: int) -> np.ndarray:
    return np.triu(np.ones((n, n)), k=1)


def loss(out: DenoiserOutput, X_target: np.ndarray, E_target: np.ndarray, lam: float) -> Tensor:
    """Node cross-entropy plus ``lam`` times edge cross-entropy over pairs i < j.

    Works on batched outputs; the forward value is an exactly rounded sum, so it
    does not depend on node order.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    X_target = np.asarray(X_target, dtype=np.float64)
    E_target = np.asarray(E_target, dtype=np.float64)
    if X_target.ndim == 2:
        X_target, E_target = X_target[None], E_target[None]
    n = X_target.shape[-2]
    ce_x = ops.cross_entropy(out.X, X_target)
    ce_e = ops.cross_entropy(out.E, E_target)
    ce_e = ops.mul(ce_e, np.ascontiguousarray(np.broadcast_to(upper_mask(n), ce_e.shape)))
    node = ops.reshape(ce_x, (-1,))
    edge = ops.scale(ops.reshape(ce_e, (-1,)), lam)
    return ops.sum_exact(ops.concat([node, edge], axis=0))


def graph_loss(out: DenoiserOutput, target: Graph, lam: float) -> Tensor:
    return loss(out, target.X, target.E, lam)
