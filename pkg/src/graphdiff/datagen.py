"""Synthetic datasets: SBM, planar, toy molecules, cycles and random graphs."""

from __future__ import annotations

import networkx as nx
import numpy as np
from scipy.spatial import Delaunay, QhullError

from .features import MoleculeTable
from .graph import Graph, GraphError, encode_graph

MAX_RETRIES = 10
DEFAULT_MIXTURE = (0.6, 0.15, 0.15, 0.1)


def _from_adjacency(A: np.ndarray) -> Graph:
    A = np.asarray(A, dtype=np.int64)
    return encode_graph(np.zeros(A.shape[0], dtype=np.int64), A, 1, 2)


def _symmetric_bernoulli(P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = P.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    A = np.zeros((n, n), dtype=np.int64)
    hit = rng.random(iu.size) < P[iu, ju]
    A[iu[hit], ju[hit]] = 1
    return A + A.T


def gen_sbm(num_graphs: int, community_count_range=(2, 2), sizes=(8, 8), p_intra: float = 0.7,
            p_inter: float = 0.05, rng: np.random.Generator | None = None) -> list[Graph]:
    """Stochastic block model graphs with one edge class.

    The community count and each community's size are drawn uniformly from
    the inclusive ranges.
    """
    if not 0.0 <= p_inter < p_intra <= 1.0:
        raise ValueError(f"need 0 <= p_inter < p_intra <= 1, got {p_inter}, {p_intra}")
    lo_c, hi_c = community_count_range
    lo_s, hi_s = sizes
    if lo_c < 1 or hi_c < lo_c or lo_s < 1 or hi_s < lo_s:
        raise ValueError("bad community or size range")
    rng = rng if rng is not None else np.random.default_rng()
    out = []
    for _ in range(num_graphs):
        k = int(rng.integers(lo_c, hi_c + 1))
        block_sizes = rng.integers(lo_s, hi_s + 1, size=k)
        block = np.repeat(np.arange(k), block_sizes)
        P = np.where(block[:, None] == block[None, :], p_intra, p_inter)
        out.append(_from_adjacency(_symmetric_bernoulli(P, rng)))
    return out


def planarity_check(g) -> bool:
    """True iff the binarised graph is planar. Accepts a Graph or an adjacency matrix."""
    A = g.adjacency() if isinstance(g, Graph) else np.asarray(g) != 0
    n = A.shape[0]
    m = int(np.triu(A, k=1).sum())
    if n >= 3 and m > 3 * n - 6:
        return False
    planar, _ = nx.check_planarity(nx.from_numpy_array(A.astype(np.int64)))
    return bool(planar)


def is_connected(g) -> bool:
    A = g.adjacency() if isinstance(g, Graph) else np.asarray(g) != 0
    if A.shape[0] == 0:
        return True
    return nx.is_connected(nx.from_numpy_array(A.astype(np.int64)))


def delaunay_graph(points: np.ndarray) -> Graph:
    tri = Delaunay(points)
    n = points.shape[0]
    A = np.zeros((n, n), dtype=np.int64)
    for simplex in tri.simplices:
        for u in range(3):
            for v in range(u + 1, 3):
                i, j = simplex[u], simplex[v]
                A[i, j] = A[j, i] = 1
    return _from_adjacency(A)


def gen_planar(num_graphs: int, n: int = 64, rng: np.random.Generator | None = None) -> list[Graph]:
    """Delaunay triangulations of ``n`` uniform points in the unit square."""
    if n < 3:
        raise ValueError("planar graphs need n >= 3")
    rng = rng if rng is not None else np.random.default_rng()
    out = []
    for _ in range(num_graphs):
        for _attempt in range(MAX_RETRIES + 1):
            try:
                g = delaunay_graph(rng.random((n, 2)))
            except QhullError:
                continue
            # duplicate points can leave a vertex out of every simplex
            if planarity_check(g) and is_connected(g):
                out.append(g)
                break
        else:
            raise GraphError(f"no valid triangulation after {MAX_RETRIES} retries")
    return out


def gen_cycles(num_graphs: int, sizes=(6, 8), rng: np.random.Generator | None = None) -> list[Graph]:
    """Simple cycles C_n with n uniform on the inclusive range."""
    rng = rng if rng is not None else np.random.default_rng()
    out = []
    for n in rng.integers(sizes[0], sizes[1] + 1, size=num_graphs):
        A = np.zeros((n, n), dtype=np.int64)
        idx = np.arange(n)
        A[idx, (idx + 1) % n] = 1
        A[(idx + 1) % n, idx] = 1
        out.append(_from_adjacency(A))
    return out


def gen_erdos_renyi(num_graphs: int, n: int, p_range=(0.1, 0.6), rng: np.random.Generator | None = None):
    """G(n, p) graphs with p uniform on ``p_range``; spreads edge counts widely."""
    rng = rng if rng is not None else np.random.default_rng()
    out = []
    for p in rng.uniform(p_range[0], p_range[1], size=num_graphs):
        out.append(_from_adjacency(_symmetric_bernoulli(np.full((n, n), p), rng)))
    return out


def _try_molecule(atoms: np.ndarray, valence: np.ndarray, max_order: int, p_extra: float,
                  rng: np.random.Generator):
    """Spanning tree of single bonds, then random extra bonds; None if impossible."""
    n = atoms.size
    order = sorted(range(n), key=lambda i: -valence[atoms[i]])
    cap = valence[atoms].astype(np.int64)
    bonds = np.zeros((n, n), dtype=np.int64)
    placed = [order[0]]
    for v in order[1:]:
        open_ = [u for u in placed if cap[u] > 0]
        if not open_ or cap[v] < 1:
            return None
        u = open_[rng.integers(len(open_))]
        bonds[u, v] = bonds[v, u] = 1
        cap[u] -= 1
        cap[v] -= 1
        placed.append(v)
    iu, ju = np.triu_indices(n, k=1)
    for k in rng.permutation(iu.size):
        i, j = iu[k], ju[k]
        if cap[i] > 0 and cap[j] > 0 and bonds[i, j] < max_order and rng.random() < p_extra:
            bonds[i, j] += 1
            bonds[j, i] += 1
            cap[i] -= 1
            cap[j] -= 1
    return bonds


def gen_toy_molecules(num_graphs: int, table: MoleculeTable | None = None, rng: np.random.Generator | None = None,
                      mixture=DEFAULT_MIXTURE, size_range=(2, 9), p_extra: float = 0.15) -> list[Graph]:
    """Connected, valence-respecting molecule-like graphs of at most 9 atoms.

    Atoms are drawn i.i.d. from ``mixture``; atom multisets that admit no
    spanning tree (e.g. three fluorines) are redrawn.
    """
    table = table or MoleculeTable()
    rng = rng if rng is not None else np.random.default_rng()
    valence = table.valence_vector().astype(np.int64)
    mixture = np.asarray(mixture, dtype=np.float64)
    if mixture.size != valence.size or np.any(mixture < 0) or not np.isclose(mixture.sum(), 1.0):
        raise ValueError("mixture must be a distribution over the atom table")
    if size_range[1] > 9 or size_range[0] < 1:
        raise ValueError("molecule sizes must lie in 1..9")
    a, b = valence.size, len(table.bond_orders)
    max_order = max(table.bond_orders)
    out = []
    while len(out) < num_graphs:
        n = int(rng.integers(size_range[0], size_range[1] + 1))
        atoms = rng.choice(a, size=n, p=mixture)
        bonds = _try_molecule(atoms, valence, max_order, p_extra, rng)
        if bonds is not None:
            out.append(encode_graph(atoms, bonds, a, b))
    return out


def edge_count_targets(graphs: list[Graph]) -> np.ndarray:
    return np.array([[float(g.num_edges())] for g in graphs])
