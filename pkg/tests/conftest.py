import time

import numpy as np
import pytest
from hypothesis import settings

from loopspace.manifold import Euclidean, FlatTorus2, UnitSphere

settings.register_profile("default", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["circle", "sphere2", "flat-torus2"])
def compact(request):
    return {"circle": UnitSphere.circle(), "sphere2": UnitSphere.sphere2(),
            "flat-torus2": FlatTorus2.make()}[request.param]


@pytest.fixture
def sphere():
    return UnitSphere.sphere2()


@pytest.fixture
def torus():
    return FlatTorus2.make()


@pytest.fixture
def euclid3():
    return Euclidean.of(3)


def in_v_pairs(M, rng, n, frac=0.95):
    """n pairs (u, q) with q = exp(u, v), |v| < frac * safety * r_inj."""
    u = M.random_points(rng, n)
    basis = M.tangent_basis(u)
    c = rng.normal(size=(n, M.dim))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    c *= rng.uniform(0, frac * M.safety * min(M.r_inj, 10.0), size=(n, 1))
    v = np.einsum("ij,ijk->ik", c, basis)
    return u, v, M.exp(u, v)


SESSION_START = time.perf_counter()


def pytest_collection_modifyitems(session, config, items):
    # acceptance runs last so its final criterion can time the whole session
    items.sort(key=lambda item: item.nodeid.startswith("tests/test_acceptance.py"))
