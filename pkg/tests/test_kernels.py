import networkx as nx
import numpy as np
import pytest

from graphdiff import kernels

from oracles import random_adjacency


def _impls():
    out = ["python"]
    if kernels.BACKEND == "cython":
        out.append("cython")
    return out


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("impl", _impls())
def test_triangles_match_networkx(impl, rng):
    for _ in range(50):
        A = random_adjacency(rng, int(rng.integers(1, 15)))
        ref = nx.triangles(nx.from_numpy_array(A))
        assert list(kernels.triangles(A, impl=impl)) == [ref[i] for i in range(len(A))]


def test_backends_agree(rng):
    if kernels.BACKEND != "cython":
        pytest.skip("compiled core not built")
    for _ in range(100):
        A = random_adjacency(rng, int(rng.integers(0, 16)))
        assert np.array_equal(kernels.orbit4(A, impl="cython"), kernels.orbit4(A, impl="python"))
        assert np.array_equal(kernels.triangles(A, impl="cython"), kernels.triangles(A, impl="python"))


def test_input_validation():
    with pytest.raises(ValueError):
        kernels.orbit4(np.ones((2, 3)))
    with pytest.raises(ValueError):
        kernels.orbit4(np.ones((3, 3)), impl="fortran")
