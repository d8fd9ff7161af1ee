"""Independent brute-force oracles shared by the tests."""

import itertools

import networkx as nx
import numpy as np


def simple_cycles_by_length(A, max_len=6):
    """(graph counts {k: count}, node counts {k: array}) by explicit enumeration."""
    G = nx.from_numpy_array(np.asarray(A, dtype=int))
    n = G.number_of_nodes()
    graph = {k: 0 for k in range(3, max_len + 1)}
    node = {k: np.zeros(n, dtype=np.int64) for k in range(3, max_len + 1)}
    for cyc in nx.simple_cycles(G, length_bound=max_len):
        k = len(cyc)
        if k < 3:
            continue
        graph[k] += 1
        node[k][list(cyc)] += 1
    return graph, node


# orbit column -> (edge count, degree sequence of the subgraph, degree of the node)
_TEMPLATES = {
    "path": nx.path_graph(4),
    "star": nx.star_graph(3),
    "c4": nx.cycle_graph(4),
    "paw": nx.Graph([(0, 1), (1, 2), (2, 0), (2, 3)]),
    "diamond": nx.Graph([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]),
    "k4": nx.complete_graph(4),
}


def naive_orbits(A):
    """Orbit counts 4..14 by looping over every 4-subset and matching templates."""
    A = np.asarray(A) != 0
    n = A.shape[0]
    out = np.zeros((n, 11), dtype=np.int64)
    for quad in itertools.combinations(range(n), 4):
        H = nx.Graph()
        H.add_nodes_from(quad)
        H.add_edges_from((u, v) for u, v in itertools.combinations(quad, 2) if A[u, v])
        if not nx.is_connected(H):
            continue
        deg = dict(H.degree())
        if nx.is_isomorphic(H, _TEMPLATES["path"]):
            cols = {v: 0 if deg[v] == 1 else 1 for v in quad}
        elif nx.is_isomorphic(H, _TEMPLATES["star"]):
            cols = {v: 3 if deg[v] == 3 else 2 for v in quad}
        elif nx.is_isomorphic(H, _TEMPLATES["c4"]):
            cols = {v: 4 for v in quad}
        elif nx.is_isomorphic(H, _TEMPLATES["paw"]):
            cols = {v: {1: 5, 2: 6, 3: 7}[deg[v]] for v in quad}
        elif nx.is_isomorphic(H, _TEMPLATES["diamond"]):
            cols = {v: 8 if deg[v] == 2 else 9 for v in quad}
        else:
            cols = {v: 10 for v in quad}
        for v, c in cols.items():
            out[v, c] += 1
    return out


def random_adjacency(rng, n, p=None):
    p = rng.uniform(0.1, 0.9) if p is None else p
    A = np.triu((rng.random((n, n)) < p).astype(np.int64), 1)
    return A + A.T
