import networkx as nx
import numpy as np
import pytest

from graphdiff import datagen as D
from graphdiff.features import MoleculeTable, spectral_features
from graphdiff.metrics import validity


def test_sbm_deterministic_limit():
    for g in D.gen_sbm(5, sizes=(3, 3), p_intra=1.0, p_inter=0.0, rng=np.random.default_rng(0)):
        A = g.adjacency()
        block = np.kron(np.eye(2), np.ones((3, 3))) - np.eye(6)
        assert np.array_equal(A, block)


def test_sbm_density_and_components():
    graphs = D.gen_sbm(500, sizes=(5, 5), p_intra=0.6, p_inter=0.0, rng=np.random.default_rng(1))
    edges = 0
    for g in graphs:
        # with p_inter = 0 there are at least as many components as communities
        assert spectral_features(g.adjacency())[0][0] >= 2
        edges += g.num_edges()
    assert abs(edges / (500 * 2 * 10) - 0.6) < 0.02


def test_sbm_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        D.gen_sbm(1, p_intra=0.3, p_inter=0.5)


def test_planarity_check_kuratowski_and_trees(rng):
    assert not D.planarity_check(nx.to_numpy_array(nx.complete_graph(5)))
    assert not D.planarity_check(nx.to_numpy_array(nx.complete_bipartite_graph(3, 3)))
    for n in (1, 2, 10, 40):
        assert D.planarity_check(nx.to_numpy_array(nx.random_labeled_tree(n, seed=n)))


def test_planar_generator():
    graphs = D.gen_planar(10, n=30, rng=np.random.default_rng(2))
    for g in graphs:
        assert g.n == 30 and D.planarity_check(g) and D.is_connected(g)
    tri = D.delaunay_graph(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert tri.num_edges() == 3


def test_cycles_and_er():
    for g in D.gen_cycles(20, sizes=(6, 8), rng=np.random.default_rng(0)):
        assert 6 <= g.n <= 8 and np.all(g.adjacency().sum(1) == 2) and D.is_connected(g)
    er = D.gen_erdos_renyi(5, 7, rng=np.random.default_rng(0))
    assert [g.n for g in er] == [7] * 5
    assert D.edge_count_targets(er).shape == (5, 1)


def test_toy_molecules():
    table = MoleculeTable()
    graphs = D.gen_toy_molecules(10_000, table, np.random.default_rng(3))
    counts = np.zeros(4)
    for g in graphs[:2000]:
        assert g.n <= 9 and validity(g, table)
    for g in graphs:
        counts += g.X.sum(0)
    assert np.allclose(counts / counts.sum(), D.DEFAULT_MIXTURE, atol=0.02)


def test_generators_are_deterministic():
    for fn in (lambda r: D.gen_sbm(3, rng=r), lambda r: D.gen_planar(2, 12, rng=r),
               lambda r: D.gen_toy_molecules(5, rng=r), lambda r: D.gen_cycles(4, rng=r)):
        assert fn(np.random.default_rng(9)) == fn(np.random.default_rng(9))
