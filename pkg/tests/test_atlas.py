import numpy as np
import pytest

from loopspace.atlas import (
    Chart,
    PullbackSection,
    TransitionData,
    chart_contains,
    chart_forward,
    chart_inverse,
    find_chart_center,
    smoothness_probe,
    transition_apply,
    transition_pointwise,
)
from loopspace.errors import (
    DomainExit,
    GridMismatch,
    NonSmoothCenter,
    OutsideW12,
    PairOutsideV,
    TangencyViolation,
)
from loopspace.loops import FourierLoop, GridLoop, ManifoldLoop, grid_times
from loopspace.manifold import Euclidean, UnitSphere
from loopspace.smoothing import mollify_to_manifold


def latitude(theta, phase=0.0):
    s, c = np.sin(theta), np.cos(theta)
    return FourierLoop.from_trig(cos={1: [s * np.cos(phase), s * np.sin(phase), 0]},
                                 sin={1: [-s * np.sin(phase), s * np.cos(phase), 0]},
                                 const=[0, 0, c])


def noisy(M, loop, rng, n=256, noise=0.03):
    pts = loop(grid_times(n))
    return ManifoldLoop(GridLoop(M.project(pts + noise * rng.normal(size=pts.shape))), M)


@pytest.fixture
def chart(sphere):
    return Chart(ManifoldLoop(latitude(np.pi / 3), sphere), 256)


def test_zero_section_maps_to_center(chart):
    out = chart_forward(chart, PullbackSection.zero(chart))
    np.testing.assert_array_equal(out.samples(), chart.center_samples)


def test_chart_roundtrips(sphere, chart, rng):
    beta = noisy(sphere, latitude(np.pi / 3), rng, noise=0.2)
    assert chart_contains(chart, beta)
    sec = chart_inverse(chart, beta)
    np.testing.assert_allclose(chart_forward(chart, sec).samples(), beta.samples(), atol=1e-12)
    back = chart_inverse(chart, chart_forward(chart, sec))
    np.testing.assert_allclose(back.vectors, sec.vectors, atol=1e-12)


def test_euclidean_chart_is_translation(rng):
    E = Euclidean.of(2)
    center = ManifoldLoop(FourierLoop.from_trig(cos={1: [1.0, 0]}, sin={1: [0, 1.0]}), E)
    ch = Chart(center, 64)
    beta = ManifoldLoop(GridLoop(rng.normal(size=(64, 2))), E)
    np.testing.assert_allclose(chart_inverse(ch, beta).vectors, beta.samples() - ch.center_samples)


def test_chart_rejects_rough_center(sphere, rng):
    with pytest.raises(NonSmoothCenter):
        Chart(noisy(sphere, latitude(1.0), rng))


def test_antipodal_loop_outside_chart(sphere, chart):
    far = ManifoldLoop(GridLoop(-chart.center_samples), sphere)
    assert not chart_contains(chart, far)
    with pytest.raises(PairOutsideV):
        chart_inverse(chart, far)


def test_section_validation(sphere, chart):
    with pytest.raises(TangencyViolation):
        PullbackSection(sphere, chart.center_samples, chart.center_samples)
    with pytest.raises(PairOutsideV):
        chart_forward(chart, PullbackSection.zero(chart).with_vectors(
            3.0 * sphere.tangent_basis(chart.center_samples)[:, 0]))
    other = Chart(ManifoldLoop(latitude(np.pi / 3), sphere), 128)
    with pytest.raises(GridMismatch):
        chart_forward(chart, PullbackSection.zero(other))


def test_find_chart_center_contains_loop(sphere, rng):
    beta = noisy(sphere, latitude(1.2), rng)
    ch = find_chart_center(beta)
    assert ch.center.smooth and chart_contains(ch, beta)


# -- transitions --------------------------------------------------------------------

@pytest.fixture
def transition(sphere, rng):
    beta = noisy(sphere, latitude(1.2), rng)
    c1 = find_chart_center(beta)
    c2 = Chart(ManifoldLoop(latitude(1.25, 0.05), sphere), 256)
    return beta, TransitionData(c1, c2)


def test_transition_pointwise_inverse(sphere, transition, rng):
    beta, T = transition
    t = rng.uniform(0, 1, size=1000)
    a1 = T.first.center_at(t)
    v = sphere.tangent_project(a1, 0.3 * rng.normal(size=a1.shape))
    w = transition_pointwise(T, t, v)
    np.testing.assert_allclose(transition_pointwise(T.reversed(), t, w), v, atol=1e-8)


def test_transition_matches_composite(transition):
    beta, T = transition
    sec = chart_inverse(T.first, beta)
    composite = chart_inverse(T.second, chart_forward(T.first, sec))
    np.testing.assert_allclose(transition_apply(T, sec).vectors, composite.vectors, atol=1e-12)


def test_transition_domain(sphere, transition):
    beta, T = transition
    a1 = T.first.center_samples
    far = PullbackSection(sphere, a1, 3.0 * sphere.tangent_basis(a1)[:, 0])
    with pytest.raises(OutsideW12):
        transition_apply(T, far)


def test_transition_is_smooth(sphere, transition, rng):
    beta, T = transition
    sec = chart_inverse(T.first, beta)
    direction = sec.with_vectors(sphere.tangent_project(sec.base, rng.normal(size=sec.vectors.shape)))
    rep = smoothness_probe(lambda s: transition_apply(T, s), sec, direction, h0=1e-2, levels=3)
    assert rep.order >= 1.8


def test_probe_on_affine_map_reports_exact():
    rep = smoothness_probe(lambda x: 3 * x + 1, np.zeros(4), np.ones(4))
    assert rep.order == float("inf")
    np.testing.assert_allclose(rep.first[-1], 3.0)


def test_probe_leaving_domain(sphere, transition):
    beta, T = transition
    sec = chart_inverse(T.first, beta)
    big = sec.with_vectors(3.0 * sphere.tangent_basis(sec.base)[:, 0])
    with pytest.raises(DomainExit):
        smoothness_probe(lambda s: transition_apply(T, s), sec, big, h0=1.0)
