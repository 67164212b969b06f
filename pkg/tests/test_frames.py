import numpy as np
import pytest

from loopspace.atlas import PullbackSection
from loopspace.errors import FrameMismatch, NonSmoothCenter
from loopspace.frames import coords_to_section, frame_along, section_to_coords
from loopspace.loops import FourierLoop, GridLoop, ManifoldLoop, fourier_fit, grid_times
from loopspace.manifold import FlatTorus2, UnitSphere


def latitude(theta):
    s = np.sin(theta)
    return FourierLoop.from_trig(cos={1: [s, 0, 0]}, sin={1: [0, s, 0]}, const=[0, 0, np.cos(theta)])


def wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


@pytest.mark.parametrize("theta, holonomy", [(np.pi / 2, 0.0), (np.pi / 3, np.pi), (np.pi / 4, 2 * np.pi * (1 - np.cos(np.pi / 4)))])
def test_latitude_holonomy(sphere, theta, holonomy):
    F = frame_along(ManifoldLoop(latitude(theta), sphere), 256)
    # enclosed area of the cap, modulo 2 pi
    assert abs(wrap(abs(F.holonomy_angle) - holonomy)) < 1e-6


def test_frame_is_orthonormal_tangent_and_smooth(sphere):
    F = frame_along(ManifoldLoop(latitude(np.pi / 3), sphere), 256)
    assert np.max(np.abs(np.einsum("ik,iak->ia", F.base, F.vectors))) < 1e-8
    gram = np.einsum("iak,ibk->iab", F.vectors, F.vectors)
    assert np.max(np.abs(gram - np.eye(2))) < 1e-8
    for a in range(2):
        fit, _ = fourier_fit(GridLoop(F.vectors[:, a]), 127)
        tail = np.abs(fit.coeffs[:, np.abs(fit.wavenumbers) > 20])
        assert tail.max() < 1e-6


def test_torus_frame_has_no_holonomy(torus):
    loop = FourierLoop.from_trig(cos={1: [1.0, 0, 0, 0], 2: [0, 0, 1.0, 0]},
                                 sin={1: [0, 1.0, 0, 0], 2: [0, 0, 0, 1.0]})
    F = frame_along(ManifoldLoop(loop, torus), 128)
    assert abs(F.holonomy_angle) < 1e-8


def test_circle_frame_rank_one():
    C = UnitSphere.circle()
    loop = FourierLoop.from_trig(cos={1: [1.0, 0]}, sin={1: [0, 1.0]})
    F = frame_along(ManifoldLoop(loop, C), 64)
    assert F.rank == 1


def test_coords_roundtrip_and_linearity(sphere, rng):
    F = frame_along(ManifoldLoop(latitude(1.0), sphere), 128)
    v = sphere.tangent_project(F.base, rng.normal(size=F.base.shape))
    w = sphere.tangent_project(F.base, rng.normal(size=F.base.shape))
    sv, sw = PullbackSection(sphere, F.base, v), PullbackSection(sphere, F.base, w)
    cv, cw = section_to_coords(F, sv), section_to_coords(F, sw)
    np.testing.assert_allclose(section_to_coords(F, sv + 2.5 * sw).samples,
                               cv.samples + 2.5 * cw.samples, atol=1e-10)
    np.testing.assert_allclose(coords_to_section(F, cv).vectors, v, atol=1e-10)


def test_frame_errors(sphere, rng):
    F = frame_along(ManifoldLoop(latitude(1.0), sphere), 128)
    with pytest.raises(FrameMismatch):
        coords_to_section(F, np.zeros((64, 2)))
    rough = ManifoldLoop(GridLoop(sphere.project(latitude(1.0)(grid_times(64)) + 0.01)), sphere)
    with pytest.raises(NonSmoothCenter):
        frame_along(rough)
