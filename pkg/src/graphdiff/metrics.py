"""Graph-set evaluation: MMD ratios of graph statistics and molecule-style scores."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import networkx as nx
import numpy as np

from . import kernels
from .features import MoleculeTable
from .graph import Graph

N_CLUSTER_BINS = 100
DENOM_FLOOR = 1e-12
DESCRIPTORS = ("degree", "clustering", "orbit")


class MetricWarning(UserWarning):
    pass


# --- per-graph descriptors ------------------------------------------------------


def _adjacency(g) -> np.ndarray:
    return g.adjacency() if isinstance(g, Graph) else np.asarray(g) != 0


def degree_hist(g) -> np.ndarray:
    """Normalised degree histogram over 0..n-1."""
    A = _adjacency(g)
    n = A.shape[0]
    counts = np.bincount(A.sum(1).astype(np.int64), minlength=max(n, 1)).astype(np.float64)
    return counts / max(n, 1)


def local_clustering(g) -> np.ndarray:
    A = _adjacency(g)
    deg = A.sum(1).astype(np.float64)
    tri = kernels.triangles(A).astype(np.float64)
    pairs = deg * (deg - 1) / 2
    return np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)


def clustering_hist(g) -> np.ndarray:
    """Local clustering coefficients in 100 uniform bins on [0, 1], normalised."""
    c = local_clustering(g)
    counts, _ = np.histogram(c, bins=N_CLUSTER_BINS, range=(0.0, 1.0))
    return counts / max(c.size, 1)


def orbit4_counts(g) -> np.ndarray:
    """(n, 11) integer counts of node orbits 4..14 in connected 4-node subgraphs."""
    return kernels.orbit4(_adjacency(g))


def orbit_profile(g) -> np.ndarray:
    """Orbit totals over all nodes as a distribution over the 11 orbits (zeros if none)."""
    tot = orbit4_counts(g).sum(0).astype(np.float64)
    s = tot.sum()
    return tot / s if s > 0 else tot


_DESCRIBE = {"degree": degree_hist, "clustering": clustering_hist, "orbit": orbit_profile}


def describe(graphs, descriptor: str) -> list[np.ndarray]:
    if descriptor not in _DESCRIBE:
        raise ValueError(f"unknown descriptor {descriptor!r}; choose from {DESCRIPTORS}")
    return [_DESCRIBE[descriptor](g) for g in graphs]


def pad_stack(*sets) -> list[np.ndarray]:
    """Zero-pad variable-length histograms to a common width."""
    width = max(len(h) for s in sets for h in s)
    out = []
    for s in sets:
        M = np.zeros((len(s), width))
        for i, h in enumerate(s):
            M[i, : len(h)] = h
        out.append(M)
    return out


# --- MMD ---------------------------------------------------------------------------


def tv_distance(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Pairwise total-variation distances between rows of P and rows of Q."""
    return 0.5 * np.abs(P[:, None, :] - Q[None, :, :]).sum(-1)


def gaussian_kernel(D: np.ndarray, sigma: float) -> np.ndarray:
    return np.exp(-(D**2) / (2.0 * sigma**2))


def median_sigma(P: np.ndarray) -> float:
    """Median heuristic over distinct pairs; 1.0 when that median is zero."""
    if len(P) < 2:
        return 1.0
    D = tv_distance(P, P)
    med = float(np.median(D[np.triu_indices(len(P), k=1)]))
    return med if med > 0 else 1.0


def _set_mean(K: np.ndarray, ia: np.ndarray, ib: np.ndarray, within: bool, unbiased: bool):
    """Mean kernel value over pairs; returns (mean, fell_back_to_biased).

    The unbiased form skips pairs that share a pool row, so it stays unbiased
    under bootstrap duplicates.
    """
    block = K[np.ix_(ia, ib)]
    if not (within and unbiased):
        return float(block.mean()), False
    keep = ia[:, None] != ib[None, :]
    if not keep.any():
        return float(block.mean()), True
    return float(block[keep].mean()), False


def mmd_from_kernel(K: np.ndarray, ia, ib, unbiased: bool = True) -> tuple[float, bool]:
    """Squared MMD of two index sets into a pooled kernel matrix.

    A set with a single distinct sample falls back to the biased form; the
    flag in the return value reports this.
    """
    ia, ib = np.asarray(ia), np.asarray(ib)
    kxx, bx = _set_mean(K, ia, ia, True, unbiased)
    kyy, by = _set_mean(K, ib, ib, True, unbiased)
    kxy, _ = _set_mean(K, ia, ib, False, unbiased)
    return kxx + kyy - 2.0 * kxy, bx or by


def mmd_squared(A, B, sigma: float, unbiased: bool = True) -> float:
    """Squared MMD between two descriptor sets, Gaussian kernel on TV distance."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("MMD needs nonempty sets")
    A, B = pad_stack(list(A), list(B))
    pool = np.vstack([A, B])
    K = gaussian_kernel(tv_distance(pool, pool), sigma)
    val, biased = mmd_from_kernel(K, np.arange(len(A)), len(A) + np.arange(len(B)), unbiased)
    if biased:
        warnings.warn("singleton set: biased MMD estimator used", MetricWarning, stacklevel=2)
    return val


@dataclass
class MmdReport:
    """Squared MMDs of one descriptor and their ratio.

    ``mmd_gen_test`` and ``mmd_train_test`` are biased (V-statistic) estimates
    and define the ratio. The unbiased estimates are kept alongside, clamped at 0.
    """

    descriptor: str
    mmd_gen_test: float
    mmd_train_test: float
    sigma: float
    unbiased_gen_test: float = 0.0
    unbiased_train_test: float = 0.0
    clamped: bool = False
    floored: bool = False

    @property
    def ratio(self) -> float:
        return self.mmd_gen_test / max(self.mmd_train_test, DENOM_FLOOR)


class _Pool:
    """Descriptors of three sets stacked into one kernel matrix."""

    def __init__(self, generated, train, test, descriptor, sigma=None):
        d = [describe(s, descriptor) for s in (generated, train, test)]
        if not all(d):
            raise ValueError("mmd_ratio needs three nonempty sets")
        G, Tr, Te = pad_stack(*d)
        self.sigma = float(sigma) if sigma is not None else median_sigma(Tr)
        pool = np.vstack([G, Tr, Te])
        self.K = gaussian_kernel(tv_distance(pool, pool), self.sigma)
        self.idx = np.split(np.arange(len(pool)), np.cumsum([len(G), len(Tr)]))

    def report(self, descriptor, ig=None, itr=None, ite=None) -> MmdReport:
        g0, tr0, te0 = self.idx
        ig = g0 if ig is None else g0[ig]
        itr = tr0 if itr is None else tr0[itr]
        ite = te0 if ite is None else te0[ite]
        num, _ = mmd_from_kernel(self.K, ig, ite, unbiased=False)
        den, _ = mmd_from_kernel(self.K, itr, ite, unbiased=False)
        u_num, _ = mmd_from_kernel(self.K, ig, ite)
        u_den, _ = mmd_from_kernel(self.K, itr, ite)
        clamped = u_num < 0 or u_den < 0
        return MmdReport(descriptor, num, den, self.sigma, max(u_num, 0.0), max(u_den, 0.0), clamped,
                         den < DENOM_FLOOR)


def mmd_ratio(generated, train, test, descriptor: str, sigma: float | None = None) -> MmdReport:
    """MMD^2(generated, test) / MMD^2(train, test) for one descriptor.

    sigma defaults to the median TV distance within the training set.
    """
    rep = _Pool(generated, train, test, descriptor, sigma).report(descriptor)
    if rep.clamped:
        warnings.warn(f"{descriptor}: negative unbiased MMD^2 estimate clamped to 0", MetricWarning, stacklevel=2)
    if rep.floored:
        warnings.warn(f"{descriptor}: train-test MMD^2 below {DENOM_FLOOR}, denominator floored", MetricWarning,
                      stacklevel=2)
    return rep


def bootstrap_ratio(generated, train, test, descriptor: str, rng: np.random.Generator, n_boot: int = 200,
                    level: float = 0.95, sigma: float | None = None) -> tuple[float, float, float]:
    """Point ratio and a percentile bootstrap interval; every set is resampled."""
    pool = _Pool(generated, train, test, descriptor, sigma)
    point = pool.report(descriptor).ratio
    sizes = [len(i) for i in pool.idx]
    ratios = np.empty(n_boot)
    for k in range(n_boot):
        picks = [rng.integers(0, m, size=m) for m in sizes]
        ratios[k] = pool.report(descriptor, *picks).ratio
    lo, hi = np.quantile(ratios, [(1 - level) / 2, (1 + level) / 2])
    return point, float(lo), float(hi)


# --- molecule-style metrics ----------------------------------------------------------


def validity(g: Graph, table: MoleculeTable | None = None) -> bool:
    """Connected, and every atom's bond-order sum is at most its valence.

    Node classes outside the table make the graph invalid (with a warning).
    """
    table = table or MoleculeTable()
    if g.n == 0:
        return False
    labels = g.node_labels()
    if labels.max() >= len(table.atom_symbols) or g.b > len(table.bond_orders):
        warnings.warn("graph uses classes outside the valence table", MetricWarning, stacklevel=2)
        return False
    orders = np.asarray(table.bond_orders, dtype=np.float64)[: g.b]
    bond_sum = (g.E @ orders).sum(1)
    if np.any(bond_sum > table.valence_vector()[labels]):
        return False
    return bool(nx.is_connected(to_networkx(g)))


def to_networkx(g: Graph) -> nx.Graph:
    G = nx.Graph()
    for i, c in enumerate(g.node_labels().tolist()):
        G.add_node(i, label=str(c))
    el = g.edge_labels()
    iu, ju = np.nonzero(np.triu(el, k=1))
    for i, j in zip(iu.tolist(), ju.tolist()):
        G.add_edge(i, j, label=str(el[i, j]))
    return G


def _match(a, b) -> bool:
    return a["label"] == b["label"]


class IsoIndex:
    """Isomorphism classes of labelled graphs.

    Graphs are bucketed by a Weisfeiler-Lehman hash and compared exactly
    (VF2 backtracking) within a bucket, so two graphs share a class only if
    they are isomorphic. Adversarial pairs with equal hashes can be slow.
    """

    def __init__(self):
        self.buckets: dict[str, list[tuple[int, nx.Graph]]] = {}
        self.size = 0

    @staticmethod
    def key(G: nx.Graph) -> str:
        h = nx.weisfeiler_lehman_graph_hash(G, node_attr="label", edge_attr="label", iterations=3)
        return f"{G.number_of_nodes()}:{G.number_of_edges()}:{h}"

    def find(self, g: Graph) -> int | None:
        G = to_networkx(g)
        for cid, H in self.buckets.get(self.key(G), []):
            if nx.is_isomorphic(G, H, node_match=_match, edge_match=_match):
                return cid
        return None

    def add(self, g: Graph) -> int:
        G = to_networkx(g)
        bucket = self.buckets.setdefault(self.key(G), [])
        for cid, H in bucket:
            if nx.is_isomorphic(G, H, node_match=_match, edge_match=_match):
                return cid
        bucket.append((self.size, G))
        self.size += 1
        return self.size - 1


def isomorphic(g: Graph, h: Graph) -> bool:
    idx = IsoIndex()
    return idx.add(g) == idx.add(h)


def uniqueness(graphs) -> float:
    if not graphs:
        return 0.0
    idx = IsoIndex()
    for g in graphs:
        idx.add(g)
    return idx.size / len(graphs)


def novelty(graphs, train) -> float:
    """Fraction of the generated isomorphism classes that do not occur in ``train``."""
    if not graphs:
        return 0.0
    ref = IsoIndex()
    for g in train:
        ref.add(g)
    gen = IsoIndex()
    reps = {}
    for g in graphs:
        reps.setdefault(gen.add(g), g)
    novel = sum(ref.find(g) is None for g in reps.values())
    return novel / len(reps)


def evaluate_sets(generated, train, test, table: MoleculeTable | None = None, molecular: bool = False,
                  sigma: dict | None = None) -> dict:
    """Key-value report: one MMD ratio per descriptor plus uniqueness and novelty."""
    sigma = sigma or {}
    out = {"n_generated": len(generated), "n_train": len(train), "n_test": len(test)}
    for d in DESCRIPTORS:
        rep = mmd_ratio(generated, train, test, d, sigma.get(d))
        out[f"mmd_ratio_{d}"] = rep.ratio
        out[f"mmd2_gen_test_{d}"] = rep.mmd_gen_test
        out[f"mmd2_train_test_{d}"] = rep.mmd_train_test
        out[f"sigma_{d}"] = rep.sigma
    if molecular:
        out["validity"] = float(np.mean([validity(g, table) for g in generated])) if generated else 0.0
    else:
        out["validity"] = float(np.mean([g.n > 0 and nx.is_connected(to_networkx(g)) for g in generated]))
    out["uniqueness"] = uniqueness(generated)
    out["novelty"] = novelty(generated, train)
    return out


def is_single_cycle(g: Graph) -> bool:
    A = g.adjacency()
    return bool(g.n >= 3 and np.all(A.sum(1) == 2) and nx.is_connected(nx.from_numpy_array(A.astype(int))))
