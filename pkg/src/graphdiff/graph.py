"""Attributed graph data model.

A graph with ``n`` nodes carries a one-hot node matrix ``X`` of shape
``(n, a)`` and a symmetric one-hot edge tensor ``E`` of shape ``(n, n, b)``.
Edge class 0 means "no edge"; the diagonal is always class 0.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-9


class GraphError(ValueError):
    """Raised when a graph or distribution violates its invariants."""


def _one_hot(labels: np.ndarray, depth: int) -> np.ndarray:
    out = np.zeros(labels.shape + (depth,), dtype=np.float64)
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


@dataclass(eq=False)
class Graph:
    X: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.E = np.asarray(self.E, dtype=np.float64)
        if self.X.ndim != 2 or self.E.ndim != 3:
            raise GraphError(f"bad shapes X{self.X.shape} E{self.E.shape}")
        n = self.X.shape[0]
        if self.E.shape[:2] != (n, n):
            raise GraphError(f"edge tensor {self.E.shape} does not match {n} nodes")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def a(self) -> int:
        return self.X.shape[1]

    @property
    def b(self) -> int:
        return self.E.shape[2]

    def node_labels(self) -> np.ndarray:
        return self.X.argmax(axis=-1)

    def edge_labels(self) -> np.ndarray:
        return self.E.argmax(axis=-1)

    def adjacency(self) -> np.ndarray:
        """Binary adjacency: any edge class other than 0."""
        return (self.edge_labels() != 0).astype(np.int64)

    def num_edges(self) -> int:
        return int(self.adjacency().sum() // 2)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.X, other.X) and np.array_equal(self.E, other.E)

    def __repr__(self):
        return f"Graph(n={self.n}, a={self.a}, b={self.b}, edges={self.num_edges()})"

    def check(self) -> None:
        """Raise GraphError unless X, E are valid one-hot encodings."""
        check_one_hot(self.X, "X")
        check_one_hot(self.E, "E")
        if not np.array_equal(self.E, self.E.transpose(1, 0, 2)):
            raise GraphError("edge tensor is not symmetric")
        diag = self.E[np.arange(self.n), np.arange(self.n)]
        if self.n and not np.all(diag.argmax(-1) == 0):
            raise GraphError("diagonal must be the 'no edge' class")


@dataclass(eq=False)
class SoftGraph:
    """Per-node and per-edge categorical distributions."""

    X: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.E = np.asarray(self.E, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def check(self, tol: float = NORM_TOL) -> None:
        for name, p in (("X", self.X), ("E", self.E)):
            if np.any(p < -tol):
                raise GraphError(f"{name} has negative probabilities")
            err = np.abs(p.sum(-1) - 1.0)
            if err.size and err.max() > tol:
                raise GraphError(f"{name} rows not normalized (max error {err.max():.3g})")
        if np.abs(self.E - self.E.transpose(1, 0, 2)).max(initial=0.0) > tol:
            raise GraphError("edge distributions are not symmetric")


@dataclass
class DatasetStats:
    node_marginals: np.ndarray
    edge_marginals: np.ndarray
    node_count_hist: dict[int, float] = field(default_factory=dict)

    def log_prob_n(self, n: int) -> float:
        p = self.node_count_hist.get(int(n), 0.0)
        return float(np.log(p)) if p > 0 else float("-inf")

    def sample_n(self, rng: np.random.Generator, size=None):
        sizes = np.array(sorted(self.node_count_hist))
        probs = np.array([self.node_count_hist[k] for k in sizes])
        out = rng.choice(sizes, size=size, p=probs / probs.sum())
        return int(out) if size is None else out.astype(int)


def check_one_hot(arr: np.ndarray, name: str = "array") -> None:
    if arr.size == 0:
        return
    if not np.all((arr == 0.0) | (arr == 1.0)) or not np.all(arr.sum(-1) == 1.0):
        raise GraphError(f"{name} is not one-hot")


def encode_graph(labels_X, labels_E, a: int, b: int) -> Graph:
    """Build a one-hot Graph from integer class labels."""
    lx = np.asarray(labels_X, dtype=np.int64).reshape(-1)
    n = lx.shape[0]
    le = np.asarray(labels_E, dtype=np.int64).reshape(n, n) if n else np.zeros((0, 0), np.int64)
    if lx.size and (lx.min() < 0 or lx.max() >= a):
        raise GraphError(f"node class out of range [0, {a})")
    if le.size and (le.min() < 0 or le.max() >= b):
        raise GraphError(f"edge class out of range [0, {b})")
    if not np.array_equal(le, le.T):
        raise GraphError("edge labels are not symmetric")
    if np.any(np.diag(le) != 0):
        raise GraphError("self-loops are not representable")
    return Graph(_one_hot(lx, a), _one_hot(le, b))


def from_edge_list(node_labels, edges, a: int, b: int) -> Graph:
    """``edges`` is an iterable of ``(i, j, cls)`` triples."""
    n = len(node_labels)
    le = np.zeros((n, n), dtype=np.int64)
    for i, j, c in edges:
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        le[i, j] = le[j, i] = c
    return encode_graph(node_labels, le, a, b)


def collapse(g: SoftGraph, rng: np.random.Generator, tol: float = NORM_TOL) -> Graph:
    """Sample a hard graph from per-node and per-edge categoricals.

    Each unordered pair ``i < j`` is sampled once and mirrored.
    """
    g.check(tol)
    node = sample_categorical(g.X, rng)
    n = g.n
    b = g.E.shape[-1]
    iu, ju = np.triu_indices(n, k=1)
    le = np.zeros((n, n), dtype=np.int64)
    if iu.size:
        picked = sample_categorical(g.E[iu, ju], rng)
        le[iu, ju] = picked
        le[ju, iu] = picked
    return Graph(_one_hot(node, g.X.shape[-1]), _one_hot(le, b))


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling along the last axis; one uniform per row."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1] + (1,)) * cdf[..., -1:]
    idx = (u >= cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def _check_perm(perm, n: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise GraphError(f"not a permutation of {n} elements: {perm.tolist()}")
    return perm


def permute(g, perm):
    """Relabel nodes: node ``i`` of ``g`` becomes node ``perm[i]``.

    Works for both Graph and SoftGraph.
    """
    perm = _check_perm(perm, g.n)
    inv = np.argsort(perm)
    return type(g)(g.X[inv], g.E[np.ix_(inv, inv)])


def inverse_permutation(perm) -> np.ndarray:
    return np.argsort(np.asarray(perm))


def compute_stats(graphs: list[Graph]) -> DatasetStats:
    """Node/edge type marginals and the node-count histogram of a dataset."""
    if not graphs:
        raise GraphError("cannot compute statistics of an empty dataset")
    a, b = graphs[0].a, graphs[0].b
    node_counts = np.zeros(a)
    edge_counts = np.zeros(b)
    for g in graphs:
        if g.a != a or g.b != b:
            raise GraphError("graphs disagree on class counts")
        node_counts += g.X.sum(0)
        iu, ju = np.triu_indices(g.n, k=1)
        edge_counts += g.E[iu, ju].sum(0)
    m_x = node_counts / node_counts.sum()
    if edge_counts.sum() > 0:
        m_e = edge_counts / edge_counts.sum()
    else:
        m_e = np.zeros(b)
        m_e[0] = 1.0
    sizes = Counter(g.n for g in graphs)
    hist = {k: v / len(graphs) for k, v in sorted(sizes.items())}
    return DatasetStats(m_x, m_e, hist)
