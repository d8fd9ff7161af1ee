import numpy as np
import pytest

from graphdiff.denoiser import DenoiserConfig
from graphdiff.graph import encode_graph


def random_graph(rng, n, a, b, p=0.5):
    labels = rng.integers(0, a, size=n)
    le = np.zeros((n, n), dtype=np.int64)
    iu, ju = np.triu_indices(n, k=1)
    on = rng.random(iu.size) < p
    cls = rng.integers(1, b, size=iu.size) if b > 1 else np.zeros(iu.size, dtype=np.int64)
    le[iu, ju] = np.where(on, cls, 0)
    le = le + le.T
    return encode_graph(labels, le, a, b)


def tiny_cfg(**kw):
    base = dict(n_layers=2, hidden_x=8, hidden_e=4, hidden_y=4, heads=2, ff_x=8, ff_e=4, ff_y=4)
    base.update(kw)
    return DenoiserConfig(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
