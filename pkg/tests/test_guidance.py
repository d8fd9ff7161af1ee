import numpy as np
import pytest

from graphdiff.engine import Guidance, GuidanceError, Regressor, train_regressor
from graphdiff.engine.guidance import _tilt
from graphdiff.engine.sampling import reverse_arrays
from graphdiff.graph import compute_stats, permute
from graphdiff.noise import DiscreteNoise, NoiseSchedule

from conftest import random_graph, tiny_cfg


def _dists(rng, shape):
    p = rng.random(shape) + 0.05
    return p / p.sum(-1, keepdims=True)


def test_tilt_with_zero_scale_is_identity(rng):
    p = _dists(rng, (3, 5, 4))
    g = rng.normal(size=p.shape) * 10
    assert np.abs(_tilt(p, g, 0.0) - p).max() < 1e-12


def test_tilt_matches_formula_and_stays_normalised(rng):
    p = _dists(rng, (6, 3))
    g = rng.normal(size=p.shape)
    out = _tilt(p, g, 2.5)
    ref = p * np.exp(-2.5 * g)
    assert np.allclose(out, ref / ref.sum(-1, keepdims=True), atol=1e-14)
    assert np.allclose(out.sum(-1), 1, atol=1e-14)
    # zeros stay zero even under a huge tilt
    p[0] = [0.0, 1.0, 0.0]
    assert np.array_equal(_tilt(p, g * 1e3, 1.0)[0], [0.0, 1.0, 0.0])


@pytest.fixture(scope="module")
def setup():
    rng = np.random.default_rng(3)
    graphs = [random_graph(rng, int(n), 2, 2, 0.5) for n in rng.integers(3, 6, size=12)]
    noise = DiscreteNoise.from_stats(NoiseSchedule(10), "marginal", compute_stats(graphs))
    return graphs, noise


def test_zero_scale_guidance_leaves_reverse_step_unchanged(setup, rng):
    graphs, noise = setup
    reg = Regressor(tiny_cfg(), 2, 2, 1, seed=1)
    g = graphs[0]
    pX, pE = reverse_arrays(g.X[None], g.E[None], _dists(rng, (1, g.n, 2)),
                            np.broadcast_to(noise.m_E, (1, g.n, g.n, 2)).copy(), 4, noise)
    gX, gE = Guidance(reg, [3.0], 0.0).reweight(g.X[None], g.E[None], pX, pE, 4, noise.T)
    assert np.abs(gX - pX).max() < 1e-12 and np.abs(gE - pE).max() < 1e-12


def test_guidance_gradient_matches_finite_differences(setup):
    graphs, noise = setup
    reg = Regressor(tiny_cfg(features="none"), 2, 2, 1, seed=2)
    reg.y_mean, reg.y_scale = np.array([1.5]), np.array([2.0])
    guide = Guidance(reg, [4.0], 1.0)
    g = graphs[1]
    X, E = g.X[None].copy(), g.E[None].copy()
    gx, ge = guide.gradients(X, E, 3, noise.T)

    def f(X, E):
        return float(((reg.predict(X, E, 3, noise.T) - 4.0) ** 2).sum())

    h = 1e-6
    for i, c in [(0, 0), (1, 1), (2, 0)]:
        Xp, Xm = X.copy(), X.copy()
        Xp[0, i, c] += h
        Xm[0, i, c] -= h
        assert gx[0, i, c] == pytest.approx((f(Xp, E) - f(Xm, E)) / (2 * h), rel=1e-5, abs=1e-8)
    for i, j, c in [(0, 1, 0), (0, 2, 1), (1, 2, 1)]:
        Ep, Em = E.copy(), E.copy()
        for a, b in ((i, j), (j, i)):
            Ep[0, a, b, c] += h
            Em[0, a, b, c] -= h
        assert ge[0, i, j, c] == pytest.approx((f(X, Ep) - f(X, Em)) / (2 * h), rel=1e-5, abs=1e-8)
    assert np.array_equal(ge, np.swapaxes(ge, 1, 2))


def test_regressor_fits_constant_target_and_is_invariant(setup):
    graphs, noise = setup
    reg = Regressor(tiny_cfg(), 2, 2, 1, seed=0)
    trace = train_regressor(graphs, np.full(len(graphs), 7.0), noise, reg, 1000, np.random.default_rng(0), batch_size=4)
    assert np.isfinite(trace[0])
    assert np.mean(trace[-20:]) < 1e-3
    g = graphs[2]
    assert reg.predict_graph(g, 2, noise.T)[0] == pytest.approx(7.0, abs=0.1)
    perm = np.random.default_rng(5).permutation(g.n)
    # sums over nodes are reassociated under a permutation: invariant up to roundoff
    assert abs(reg.predict_graph(g, 2, noise.T) - reg.predict_graph(permute(g, perm), 2, noise.T))[0] < 1e-9


def test_target_validation(setup):
    graphs, noise = setup
    reg = Regressor(tiny_cfg(), 2, 2, 2)
    with pytest.raises(GuidanceError):
        Guidance(reg, [1.0], 1.0)
    with pytest.raises(ValueError):
        train_regressor(graphs, np.ones(len(graphs)), noise, reg, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        train_regressor(graphs, np.full((len(graphs), 2), np.nan), noise, reg, 1, np.random.default_rng(0))
