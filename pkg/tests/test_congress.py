import numpy as np
import pytest

from graphdiff.denoiser import CONGRESS, GraphTransformer
from graphdiff.engine import congress_sample, congress_train_step, fit
from graphdiff.engine.congress import congress_reverse_step
from graphdiff.noise import ContinuousNoiseParams, NoiseSchedule, offdiag_mask, posterior_mean, symmetric_normal, vp_params

from conftest import random_graph, tiny_cfg


class _ZeroRng:
    def standard_normal(self, shape):
        return np.zeros(shape)


def _model(seed=0):
    return GraphTransformer(tiny_cfg(), 2, 2, mode=CONGRESS, seed=seed)


@pytest.mark.parametrize("T", [5, 50, 500])
def test_variance_preserving_identity(T):
    p = ContinuousNoiseParams(NoiseSchedule(T))
    assert np.abs(p.sigma**2 + p.alpha**2 - 1).max() < 1e-12
    for t in range(1, T + 1):
        s = vp_params(t, p)
        assert s.sigma**2 + s.alpha**2 == pytest.approx(1.0, abs=1e-12)
        assert s.sigma_cond**2 >= 0


@pytest.mark.parametrize("t", [1, 2, 10, 49, 50])
def test_reverse_step_with_true_noise_gives_posterior_mean(t, rng):
    p = ContinuousNoiseParams(NoiseSchedule(50))
    step = vp_params(t, p)
    g = random_graph(rng, 5, 2, 2)
    x, e = g.X[None], g.E[None] * offdiag_mask(5)[..., None]
    eps_x = rng.standard_normal(x.shape)
    eps_e = symmetric_normal(e.shape, rng)
    zx, ze = step.alpha * x + step.sigma * eps_x, step.alpha * e + step.sigma * eps_e
    mx, me = congress_reverse_step(zx, ze, eps_x, eps_e, t, p, _ZeroRng())
    assert np.abs(mx - posterior_mean(x, zx, step)).max() < 1e-10
    assert np.abs(me - posterior_mean(e, ze, step)).max() < 1e-10


def test_initial_loss_matches_noise_dimension(rng):
    p = ContinuousNoiseParams(NoiseSchedule(50))
    graphs = [random_graph(rng, 6, 2, 2) for _ in range(8)]
    dims = 8 * (6 * 2 + 15 * 2)
    losses = [congress_train_step(graphs, p, _model(s), np.random.default_rng(s)) for s in range(3)]
    for l in losses:
        assert dims / 3 <= l <= dims * 3


def test_training_is_deterministic_and_loss_drops(rng):
    p = ContinuousNoiseParams(NoiseSchedule(20))
    graphs = [random_graph(rng, 4, 2, 2, 0.5) for _ in range(6)]
    runs = [fit(graphs, p, _model(1), 500, np.random.default_rng(2), batch_size=6, step_fn=congress_train_step)
            for _ in range(2)]
    assert runs[0] == runs[1]
    assert np.mean(runs[0][-25:]) <= 0.7 * np.mean(runs[0][:25])


def test_samples_are_valid_graphs():
    p = ContinuousNoiseParams(NoiseSchedule(10))
    out = congress_sample(5, _model(3), p, np.random.default_rng(0), count=20, batch_size=8)
    assert len(out) == 20
    for g in out:
        g.check()
        assert not g.adjacency().diagonal().any()


def test_discrete_model_is_rejected(rng):
    p = ContinuousNoiseParams(NoiseSchedule(10))
    with pytest.raises(ValueError):
        congress_train_step(random_graph(rng, 3, 2, 2), p, GraphTransformer(tiny_cfg(), 2, 2), rng)
