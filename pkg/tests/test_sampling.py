import numpy as np
import pytest

from graphdiff.denoiser import GraphTransformer
from graphdiff.engine.sampling import InconsistentStateError, ScaffoldMask, reverse_arrays, sample, scaffold_sample
from graphdiff.graph import compute_stats, from_edge_list
from graphdiff.noise import DiscreteNoise, NoiseSchedule, posterior_single

from conftest import random_graph, tiny_cfg


def _noise(T=10, kind="marginal", m_X=(0.3, 0.5, 0.2), m_E=(0.6, 0.4)):
    return DiscreteNoise(NoiseSchedule(T), kind, np.array(m_X), np.array(m_E))


def _random_dists(rng, shape):
    p = rng.random(shape) + 0.01
    return p / p.sum(-1, keepdims=True)


def _sym(pE):
    pE = (pE + pE.transpose(0, 2, 1, 3)) / 2
    n = pE.shape[1]
    pE[:, np.arange(n), np.arange(n)] = 0
    pE[:, np.arange(n), np.arange(n), 0] = 1
    return pE


def test_t1_returns_prediction(rng):
    noise = _noise()
    g = random_graph(rng, 4, 3, 2)
    pX = _random_dists(rng, (1, 4, 3))
    pE = _sym(_random_dists(rng, (1, 4, 4, 2)))
    rx, re = reverse_arrays(g.X[None], g.E[None], pX, pE, 1, noise)
    assert np.abs(rx - pX).max() < 1e-15
    assert np.abs(re - pE).max() < 1e-15


@pytest.mark.parametrize("t", [2, 5, 10])
def test_one_hot_prediction_gives_posterior(t, rng):
    noise = _noise()
    cur, prev = noise.matrices(t), noise.matrices(t - 1)
    for z in range(3):
        for c in range(3):
            Xt = np.eye(3)[[z]][None]
            pX = np.eye(3)[[c]][None]
            rx, _ = reverse_arrays(Xt, np.zeros((1, 1, 1, 2)) + [1, 0], pX, np.zeros((1, 1, 1, 2)) + [1, 0], t, noise)
            assert np.allclose(rx[0, 0], posterior_single(z, c, cur.Q_X, prev.Qbar_X), atol=1e-15)


def test_two_step_chain_matches_scalar_enumeration(rng):
    for kind in ("uniform", "marginal"):
        noise = DiscreteNoise(NoiseSchedule(2), kind, np.array([0.7, 0.3]), np.array([0.4, 0.6]))
        Q2 = noise.matrices(2).Q_X
        Qb1 = noise.matrices(1).Qbar_X
        for z2 in range(2):
            p_hat = _random_dists(rng, 2)
            expect = np.zeros(2)
            for x in range(2):
                w = [Qb1[x, z1] * Q2[z1, z2] for z1 in range(2)]
                if sum(w) > 0:
                    for z1 in range(2):
                        expect[z1] += p_hat[x] * w[z1] / sum(w)
            expect /= expect.sum()
            E0 = np.zeros((1, 1, 1, 2))
            E0[..., 0] = 1
            rx, _ = reverse_arrays(np.eye(2)[[z2]][None], E0, p_hat[None, None], E0, 2, noise)
            assert np.abs(rx[0, 0] - expect).max() < 1e-12


def test_impossible_state_is_rejected():
    # class 1 has zero marginal, so from clean class 0 it can never appear
    noise = DiscreteNoise(NoiseSchedule(5), "marginal", np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    E0 = np.zeros((1, 1, 1, 2))
    E0[..., 0] = 1
    with pytest.raises(InconsistentStateError):
        reverse_arrays(np.array([[[0.0, 1.0]]]), E0, np.array([[[1.0, 0.0]]]), E0, 3, noise)


def test_reverse_output_is_normalised_and_symmetric(rng):
    noise = _noise()
    g = random_graph(rng, 5, 3, 2)
    rx, re = reverse_arrays(g.X[None], g.E[None], _random_dists(rng, (1, 5, 3)),
                            _sym(_random_dists(rng, (1, 5, 5, 2))), 6, noise)
    assert np.allclose(rx.sum(-1), 1, atol=1e-12) and np.allclose(re.sum(-1), 1, atol=1e-12)
    assert np.array_equal(re, re.transpose(0, 2, 1, 3))


@pytest.fixture(scope="module")
def small_model():
    rng = np.random.default_rng(0)
    graphs = [random_graph(rng, int(n), 2, 2, 0.4) for n in (3, 4, 4, 5)]
    stats = compute_stats(graphs)
    noise = DiscreteNoise.from_stats(NoiseSchedule(6), "marginal", stats)
    return GraphTransformer(tiny_cfg(), 2, 2, seed=5), noise, stats


def test_samples_are_valid_and_sizes_follow_histogram(small_model):
    model, noise, stats = small_model
    out = sample("auto", model, noise, stats, np.random.default_rng(1), count=200)
    for g in out:
        g.check()
    assert {g.n for g in out} <= {3, 4, 5}


def test_sampling_is_deterministic(small_model):
    model, noise, stats = small_model
    a = sample("auto", model, noise, stats, np.random.default_rng(4), count=20, batch_size=7)
    b = sample("auto", model, noise, stats, np.random.default_rng(4), count=20, batch_size=7)
    assert a == b


def test_scaffold_full_empty_and_triangle(small_model):
    model, noise, _ = small_model
    tri = from_edge_list([0, 1, 0], [(0, 1, 1), (1, 2, 1), (0, 2, 1)], 2, 2)
    for g in scaffold_sample(model, ScaffoldMask(tri), 3, noise, np.random.default_rng(0), count=5):
        assert g == tri
    for g in scaffold_sample(model, ScaffoldMask(tri), 6, noise, np.random.default_rng(0), count=50):
        assert np.array_equal(g.X[:3], tri.X) and np.array_equal(g.E[:3, :3], tri.E)
    empty = from_edge_list([], [], 2, 2)
    a = scaffold_sample(model, ScaffoldMask(empty), 5, noise, np.random.default_rng(2), count=10)
    b = sample(5, model, noise, None, np.random.default_rng(2), count=10)
    assert a == b
    with pytest.raises(ValueError):
        scaffold_sample(model, ScaffoldMask(tri), 2, noise, np.random.default_rng(0))
