"""Structural, spectral and molecular features appended to the denoiser input.

Every function has an array form working on stacks of equal-size graphs
(leading batch axis) so the sampler can featurize a whole batch at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphError

CYCLES = "cycles"
SPECTRAL = "spectral"
MOLECULAR = "molecular"
ALL_FLAGS = (CYCLES, SPECTRAL, MOLECULAR)

N_EIGVALS = 5
N_EIGVECS = 2
EIG_ZERO_TOL = 1e-6

DEFAULT_VALENCE = {"C": 4, "N": 3, "O": 2, "F": 1, "H": 1}
DEFAULT_WEIGHTS = {"C": 12.011, "N": 14.007, "O": 15.999, "F": 18.998, "H": 1.008}
DEFAULT_BOND_ORDERS = (0, 1, 2, 3)


def parse_flags(spec) -> frozenset:
    """Accept 'none', 'all', a family name, a comma list, or an iterable."""
    if spec is None:
        return frozenset()
    if isinstance(spec, str):
        spec = [s.strip() for s in spec.split(",") if s.strip()]
    out = set()
    for s in spec:
        if s == "none":
            continue
        if s == "all":
            out.update(ALL_FLAGS)
        elif s in ALL_FLAGS:
            out.add(s)
        else:
            raise ValueError(f"unknown feature family {s!r}")
    return frozenset(out)


@dataclass(frozen=True)
class MoleculeTable:
    """Maps node classes to atoms and edge classes to bond orders."""

    atom_symbols: tuple = ("C", "N", "O", "F")
    valence: dict = field(default_factory=lambda: dict(DEFAULT_VALENCE))
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    bond_orders: tuple = DEFAULT_BOND_ORDERS

    def valence_vector(self) -> np.ndarray:
        return np.array([self.valence[s] for s in self.atom_symbols], dtype=np.int64)

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights[s] for s in self.atom_symbols], dtype=np.float64)

    def check_classes(self, a: int, b: int) -> None:
        if a > len(self.atom_symbols):
            raise GraphError(f"node classes {len(self.atom_symbols)}..{a - 1} have no atom symbol")
        missing = [s for s in self.atom_symbols[:a] if s not in self.valence or s not in self.weights]
        if missing:
            raise GraphError(f"atoms missing from valence/weight table: {missing}")
        if b > len(self.bond_orders):
            raise GraphError(f"edge classes beyond {len(self.bond_orders) - 1} have no bond order")


def check_adjacency(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    if not np.array_equal(A, np.swapaxes(A, -1, -2)):
        raise GraphError("adjacency is not symmetric")
    if np.any(np.diagonal(A, axis1=-2, axis2=-1) != 0):
        raise GraphError("adjacency has self-loops")
    return A.astype(np.int64)


def _diag(M):
    return np.diagonal(M, axis1=-2, axis2=-1)


def _trace(M):
    return np.trace(M, axis1=-2, axis2=-1)


def cycle_counts_doubled(A: np.ndarray):
    """Integer numerators of the closed-form cycle counts.

    Returns ``(node2, graph_num, graph_den)``: ``node2[..., :, k]`` is twice the
    number of (k+3)-cycles through each node (k = 0, 1, 2) and
    ``graph_num / graph_den`` gives y3..y6.
    """
    A = check_adjacency(A)
    A2 = A @ A
    A3 = A2 @ A
    A4 = A3 @ A
    A5 = A4 @ A
    A6 = A5 @ A
    d = A.sum(-1)
    dA3 = _diag(A3)
    x3 = dA3
    x4 = _diag(A4) - d * (d - 1) - (A @ d[..., None])[..., 0]
    x5 = (
        _diag(A5)
        - 2 * dA3 * d
        - (A @ dA3[..., None])[..., 0]
        - 2 * ((A * A2) @ d[..., None])[..., 0]
        + 5 * dA3
    )
    node2 = np.stack([x3, x4, x5], axis=-1)
    y6 = (
        _trace(A6)
        - 3 * (dA3**2).sum(-1)
        + 9 * (A * A2 * A2).sum((-2, -1))
        - 6 * (_diag(A2) * _diag(A4)).sum(-1)
        + 6 * _trace(A4)
        - 4 * _trace(A3)
        + 4 * (d**3).sum(-1)
        + 3 * A3.sum((-2, -1))
        - 12 * (d**2).sum(-1)
        + 4 * _trace(A2)
    )
    graph_num = np.stack([x3.sum(-1), x4.sum(-1), x5.sum(-1), y6], axis=-1)
    graph_den = np.array([6, 8, 10, 12])
    return node2, graph_num, graph_den


def cycle_features(A: np.ndarray):
    """Per-node 3/4/5-cycle participation and per-graph 3..6-cycle counts."""
    node2, num, den = cycle_counts_doubled(A)
    return node2 / 2.0, num / den


def laplacian(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    return np.einsum("...ij,...j->...ij", np.eye(A.shape[-1]), A.sum(-1)) - A


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive (first index on ties)."""
    idx = np.abs(vecs).argmax(axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    return vecs * np.where(pivot < 0, -1.0, 1.0)


def spectral_features(A: np.ndarray):
    """Laplacian spectrum features.

    Returns ``(graph, node)`` with graph = [component count, 5 smallest
    nonzero eigenvalues] and node = [largest-component indicator, 2 leading
    nonzero-eigenvalue eigenvectors]. Missing entries are zero.
    """
    A = check_adjacency(A)
    L = laplacian(A)
    try:
        vals, vecs = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise GraphError(f"Laplacian eigendecomposition failed: {exc}") from exc
    n = A.shape[-1]
    lead = A.shape[:-2]
    scale = np.maximum(vals[..., -1:], 1.0) if n else np.ones(lead + (1,))
    is_zero = vals <= EIG_ZERO_TOL * scale
    n_comp = is_zero.sum(-1)

    graph = np.zeros(lead + (1 + N_EIGVALS,))
    graph[..., 0] = n_comp
    node = np.zeros(lead + (n, 1 + N_EIGVECS))
    flat_vals = vals.reshape(-1, n)
    flat_vecs = vecs.reshape(-1, n, n)
    flat_zero = is_zero.reshape(-1, n)
    g_flat = graph.reshape(-1, 1 + N_EIGVALS)
    nd_flat = node.reshape(-1, n, 1 + N_EIGVECS)
    for k in range(flat_vals.shape[0]):
        z = flat_zero[k]
        nz = np.flatnonzero(~z)
        take = nz[:N_EIGVALS]
        g_flat[k, 1 : 1 + take.size] = flat_vals[k, take]
        # projector onto the null space is basis independent: P_ii = 1/|component(i)|
        V0 = flat_vecs[k][:, z]
        p_diag = (V0 * V0).sum(-1)
        if n:
            nd_flat[k, :, 0] = (p_diag <= p_diag.min() + 1e-9).astype(np.float64) * (p_diag > 0)
        ev = nz[:N_EIGVECS]
        if ev.size:
            nd_flat[k, :, 1 : 1 + ev.size] = _fix_signs(flat_vecs[k][:, ev])
    return graph, node


def molecular_features(X: np.ndarray, E: np.ndarray, table: MoleculeTable):
    """Current valency per atom and molecular weight (array form)."""
    a, b = X.shape[-1], E.shape[-1]
    table.check_classes(a, b)
    orders = np.asarray(table.bond_orders[:b], dtype=np.float64)
    valency = E @ orders
    valency = valency.sum(-1)
    weight = (X @ table.weight_vector()[:a]).sum(-1)
    return valency, weight


def molecular_features_graph(g: Graph, table: MoleculeTable | None = None):
    table = table or MoleculeTable()
    return molecular_features(g.X, g.E, table)


@dataclass
class FeatureBundle:
    """Auxiliary features for one graph or a stack of equal-size graphs.

    Column order of ``node_feats``: [X3, X4, X5] (cycles), [largest-component
    indicator, eigvec 1, eigvec 2] (spectral), [valency] (molecular).
    Column order of ``graph_feats``: [y3, y4, y5, y6] (cycles), [component
    count, 5 eigenvalues] (spectral), [molecular weight] (molecular), t/T.
    """

    node_feats: np.ndarray
    graph_feats: np.ndarray


def feature_dims(flags) -> tuple[int, int]:
    flags = parse_flags(flags)
    k_n, k_y = 0, 1
    if CYCLES in flags:
        k_n, k_y = k_n + 3, k_y + 4
    if SPECTRAL in flags:
        k_n, k_y = k_n + 1 + N_EIGVECS, k_y + 1 + N_EIGVALS
    if MOLECULAR in flags:
        k_n, k_y = k_n + 1, k_y + 1
    return k_n, k_y


def assemble_arrays(X: np.ndarray, E: np.ndarray, t, T: int, flags, table: MoleculeTable | None = None):
    """Feature bundle for stacked one-hot arrays; ``t`` may be per-graph."""
    flags = parse_flags(flags)
    lead = X.shape[:-2]
    n = X.shape[-2]
    A = (E.argmax(-1) != 0).astype(np.int64)
    node_parts, graph_parts = [], []
    if CYCLES in flags:
        xc, yc = cycle_features(A)
        node_parts.append(xc)
        graph_parts.append(yc)
    if SPECTRAL in flags:
        gs, ns = spectral_features(A)
        node_parts.append(ns)
        graph_parts.append(gs)
    if MOLECULAR in flags:
        val, wt = molecular_features(X, E, table or MoleculeTable())
        node_parts.append(val[..., None])
        graph_parts.append(wt[..., None])
    tt = np.broadcast_to(np.asarray(t, dtype=np.float64) / T, lead)
    graph_parts.append(tt[..., None])
    node = np.concatenate(node_parts, -1) if node_parts else np.zeros(lead + (n, 0))
    return FeatureBundle(node.astype(np.float64), np.concatenate(graph_parts, -1).astype(np.float64))


def assemble_features(g: Graph, t: int, T: int, flags, table: MoleculeTable | None = None) -> FeatureBundle:
    return assemble_arrays(g.X, g.E, t, T, flags, table)
