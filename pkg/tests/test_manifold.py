import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import in_v_pairs
from loopspace.errors import (
    FiberMismatch,
    NotOnManifold,
    OutsideTubularNeighbourhood,
    PairOutsideV,
    TangencyViolation,
)
from loopspace.manifold import (
    Euclidean,
    FlatTorus2,
    UnitSphere,
    VectorBundleDescriptor,
    bundle_local_add,
    bundle_local_add_inverse,
    diagonal_nbhd_contains,
    local_add,
    local_add_inverse,
    log_newton,
    manifold_from_spec,
    parallel_transport,
    project_to_manifold,
    transport_ode,
)


# -- oracles ----------------------------------------------------------------

def test_sphere_exp_quarter_turn(sphere):
    u = np.array([1.0, 0, 0])
    v = np.array([0, np.pi / 2, 0])
    np.testing.assert_allclose(local_add(sphere, u, v), [0, 1, 0], atol=1e-15)


def test_sphere_log_of_orthogonal_point(sphere):
    p = local_add_inverse(sphere, np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))
    np.testing.assert_allclose(p, [0, 0, np.pi / 2], atol=1e-15)


def test_circle_exp_is_angle_addition():
    C = UnitSphere.circle()
    u = np.array([np.cos(0.3), np.sin(0.3)])
    x = local_add(C, u, 1.1 * np.array([-u[1], u[0]]))
    np.testing.assert_allclose(x, [np.cos(1.4), np.sin(1.4)], atol=1e-15)


def test_torus_exp_adds_angles(torus):
    u = torus.from_angles(0.2, -1.0)
    v = np.array([-np.sin(0.2) * 0.5, np.cos(0.2) * 0.5, -np.sin(-1.0) * 0.7, np.cos(-1.0) * 0.7])
    a, b = torus.angles(local_add(torus, u, v))
    assert a == pytest.approx(0.7, abs=1e-14)
    assert b == pytest.approx(-0.3, abs=1e-14)


def test_zero_section_is_identity(compact, rng):
    u = compact.random_points(rng, 50)
    assert np.array_equal(local_add(compact, u, np.zeros_like(u)), u)


def test_euclidean_local_addition_is_translation(euclid3):
    u, v = np.array([1.0, 2, 3]), np.array([-1.0, 0.5, 2])
    assert np.array_equal(local_add(euclid3, u, v), u + v)
    assert np.array_equal(local_add_inverse(euclid3, u, u + v), v)


def test_projection_oracles(sphere, torus):
    np.testing.assert_allclose(project_to_manifold(sphere, [0, 0, 1.5]), [0, 0, 1])
    x = project_to_manifold(torus, [1.3, 0, 0, 0.5])
    np.testing.assert_allclose(x, [1, 0, 0, 1], atol=1e-15)
    with pytest.raises(OutsideTubularNeighbourhood):
        project_to_manifold(sphere, [0.0, 0, 0])


def test_manifold_spec_strings():
    assert manifold_from_spec("euclidean:4").ambient == 4
    assert manifold_from_spec("circle").dim == 1
    assert manifold_from_spec("sphere2").dim == 2
    assert manifold_from_spec("flat-torus2").ambient == 4
    with pytest.raises(ValueError):
        manifold_from_spec("klein-bottle")


# -- properties ---------------------------------------------------------------

@pytest.mark.parametrize("name", ["circle", "sphere2", "flat-torus2"])
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_exp_log_roundtrip(name, seed):
    M = manifold_from_spec(name)
    rng = np.random.default_rng(seed)
    u, v, q = in_v_pairs(M, rng, 20)
    np.testing.assert_allclose(local_add_inverse(M, u, q), v, atol=1e-9)
    np.testing.assert_allclose(local_add(M, u, local_add_inverse(M, u, q)), q, atol=1e-9)


def test_antipodal_pair_is_outside_v(sphere):
    u = np.array([0, 0, 1.0])
    assert not diagonal_nbhd_contains(sphere, u, -u)
    with pytest.raises(PairOutsideV):
        local_add_inverse(sphere, u, -u)


def test_log_newton_matches_closed_form(compact, rng):
    u, v, q = in_v_pairs(compact, rng, 10, frac=0.8)
    for ui, vi, qi in zip(u, v, q):
        np.testing.assert_allclose(log_newton(compact, ui, qi), vi, atol=1e-9)


def test_rejects_off_manifold_and_non_tangent(sphere):
    with pytest.raises(NotOnManifold):
        sphere.check_on_manifold([1.0, 1.0, 0])
    with pytest.raises(TangencyViolation):
        local_add(sphere, np.array([0, 0, 1.0]), np.array([0, 0, 0.1]))


@pytest.mark.parametrize("name", ["circle", "sphere2", "flat-torus2"])
def test_transport_is_isometry_and_matches_ode(name, rng):
    M = manifold_from_spec(name)
    u, p, x = in_v_pairs(M, rng, 8, frac=0.8)
    w = M.tangent_project(u, rng.normal(size=u.shape))
    out = parallel_transport(M, u, p, w)
    M.check_tangent(x, out, tol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), np.linalg.norm(w, axis=1), rtol=1e-12)
    for i in range(len(u)):
        np.testing.assert_allclose(transport_ode(M, u[i], p[i], w[i], steps=64), out[i], atol=1e-6)


def test_transport_rejects_long_vectors(sphere):
    u = np.array([0, 0, 1.0])
    with pytest.raises(PairOutsideV):
        parallel_transport(sphere, u, np.array([4.0, 0, 0]), np.array([0, 1.0, 0]))


def test_transport_along_equator_oracle(sphere):
    # moving along the equator keeps the north direction fixed
    u = np.array([1.0, 0, 0])
    out = parallel_transport(sphere, u, np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))
    np.testing.assert_allclose(out, [0, 0, 1], atol=1e-15)


# -- bundles ----------------------------------------------------------------

def test_bundle_local_addition_roundtrip(sphere, rng):
    B = VectorBundleDescriptor.tangent(sphere)
    u, p, x = in_v_pairs(sphere, rng, 5, frac=0.7)
    for i in range(5):
        v = sphere.tangent_project(u[i], rng.normal(size=3))
        w = sphere.tangent_project(u[i], rng.normal(size=3))
        x_i, y = bundle_local_add(B, u[i], p[i], v, w)
        np.testing.assert_allclose(x_i, x[i], atol=1e-14)
        p_back, v_back, w_back = bundle_local_add_inverse(B, u[i], v, x_i, y)
        np.testing.assert_allclose(p_back, p[i], atol=1e-9)
        np.testing.assert_allclose(v_back, v)
        np.testing.assert_allclose(w_back, w, atol=1e-9)


def test_bundle_zero_section(sphere):
    B = VectorBundleDescriptor.tangent(sphere)
    u = np.array([0, 0, 1.0])
    v = np.array([0.3, -0.1, 0])
    x, y = bundle_local_add(B, u, np.zeros(3), v, np.zeros(3))
    np.testing.assert_array_equal(x, u)
    np.testing.assert_allclose(y, v)


def test_trivial_bundle_checks_rank(torus):
    B = VectorBundleDescriptor.trivial(torus, 2)
    u = torus.from_angles(0.0, 0.0)
    x, y = bundle_local_add(B, u, np.zeros(4), np.array([1.0, 2.0]), np.array([0.5, 0.0]))
    np.testing.assert_array_equal(y, [1.5, 2.0])
    with pytest.raises(FiberMismatch):
        bundle_local_add(B, u, np.zeros(4), np.ones(3), np.ones(3))


def test_euclidean_is_not_compact():
    assert not Euclidean.of(2).compact
    assert FlatTorus2.make().compact
