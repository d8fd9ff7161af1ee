import itertools
import math

import numpy as np
import pytest

from graphdiff.denoiser import GraphTransformer
from graphdiff.engine import elbo, exact_log_likelihood
from graphdiff.engine.likelihood import enumerate_states, kl_categorical, _model_reverse
from graphdiff.graph import DatasetStats, from_edge_list
from graphdiff.noise import DiscreteNoise, NoiseSchedule

from conftest import tiny_cfg


def _system(seed, T=3):
    rng = np.random.default_rng(seed)
    m_X = rng.dirichlet([2, 2])
    m_E = rng.dirichlet([2, 2])
    noise = DiscreteNoise(NoiseSchedule(T), "marginal", m_X, m_E)
    stats = DatasetStats(m_X, m_E, {2: 0.75, 3: 0.25})
    model = GraphTransformer(tiny_cfg(features="none"), 2, 2, seed=seed)
    return noise, stats, model


def _trajectory_oracle(g, model, noise, stats):
    """log p(G) by explicitly summing over all trajectories G^T..G^1."""
    SX, SE = enumerate_states(2, 2, 2)
    S = len(SX)
    trans = {}
    for t in range(1, noise.T + 1):
        for s in range(S):
            rx, re = _model_reverse(model, SX[s : s + 1], SE[s : s + 1], t, noise)
            for s2 in range(S):
                p = 1.0
                for i in range(2):
                    p *= float(rx[0, i] @ SX[s2, i])
                p *= float(re[0, 0, 1] @ SE[s2, 0, 1])
                trans[t, s, s2] = p
    prior = [float(noise.m_X @ SX[s, 0]) * float(noise.m_X @ SX[s, 1]) * float(noise.m_E @ SE[s, 0, 1]) for s in range(S)]
    target = next(s for s in range(S) if np.array_equal(SX[s], g.X) and np.array_equal(SE[s], g.E))
    total = 0.0
    for path in itertools.product(range(S), repeat=noise.T):
        # path = (s_T, ..., s_1)
        p = prior[path[0]]
        for k in range(noise.T - 1):
            p *= trans[noise.T - k, path[k], path[k + 1]]
        total += p * trans[1, path[-1], target]
    return stats.log_prob_n(2) + math.log(total)


G = from_edge_list([0, 1], [(0, 1, 1)], 2, 2)


def test_kl_categorical_basics():
    q = np.array([0.2, 0.8])
    assert kl_categorical(q, q) == 0.0
    assert kl_categorical(q, np.array([0.5, 0.5])) > 0
    assert kl_categorical(np.array([1.0, 0.0]), np.array([0.3, 0.7])) == pytest.approx(-math.log(0.3))
    assert kl_categorical(q, np.array([1.0, 0.0])) == math.inf


def test_exact_likelihood_matches_trajectory_sum():
    for seed in range(2):
        noise, stats, model = _system(seed)
        assert exact_log_likelihood(G, model, noise, stats) == pytest.approx(
            _trajectory_oracle(G, model, noise, stats), abs=1e-12
        )


@pytest.mark.parametrize("seed", range(5))
def test_elbo_is_a_lower_bound(seed):
    noise, stats, model = _system(seed)
    rep = elbo(G, model, noise, stats, exact=True)
    assert rep.prior >= -1e-9 and all(d >= -1e-9 for d in rep.diffusion)
    assert len(rep.diffusion) == noise.T - 1
    assert exact_log_likelihood(G, model, noise, stats) - rep.total >= -1e-8


def test_monte_carlo_elbo_agrees_with_exact():
    noise, stats, model = _system(7)
    exact = elbo(G, model, noise, stats, exact=True).total
    mc = elbo(G, model, noise, stats, n_mc=4000, rng=np.random.default_rng(0)).total
    assert mc == pytest.approx(exact, abs=0.05)


def test_unseen_size_gives_minus_infinity():
    noise, stats, model = _system(0)
    g4 = from_edge_list([0, 0, 1, 1], [], 2, 2)
    rep = elbo(g4, model, noise, stats, n_mc=2, rng=np.random.default_rng(0))
    assert rep.log_pn == -math.inf and rep.total == -math.inf
    with pytest.raises(ValueError):
        elbo(G, model, noise, stats, n_mc=0)


class _Oracle:
    """Stand-in denoiser that always predicts the true graph."""

    def __init__(self, g):
        self.g = g

    def featurize(self, X, E, t, T):
        return None

    def __call__(self, X, E, bundle):
        from graphdiff.denoiser import DenoiserOutput
        from graphdiff.nn import Tensor

        B = X.shape[0]
        return DenoiserOutput(Tensor(np.broadcast_to(self.g.X, (B,) + self.g.X.shape).copy()),
                              Tensor(np.broadcast_to(self.g.E, (B,) + self.g.E.shape).copy()))


def test_perfect_denoiser_has_zero_reconstruction_and_diffusion():
    noise, stats, _ = _system(1, T=5)
    rep = elbo(G, _Oracle(G), noise, stats, exact=True)
    assert rep.reconstruction == pytest.approx(0.0, abs=1e-12)
    assert max(abs(d) for d in rep.diffusion) < 1e-12
    assert rep.total == pytest.approx(stats.log_prob_n(2) - rep.prior, abs=1e-12)
