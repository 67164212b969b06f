"""Parallel moving frames along smooth loops.

Parallel transport around a closed loop generally fails to close up; the
mismatch is the holonomy.  For rank-2 bundles it is a rotation by an angle
theta, and rotating the transported frame by R(-t theta) produces a
smooth periodic frame.  Sections of alpha^*TM then become R^k-valued loops
by taking frame coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, logm

from .atlas import PullbackSection
from .errors import FrameMismatch, HolonomyCorrectionFailure, NonSmoothCenter
from .loops import FourierLoop, GridLoop, ManifoldLoop, grid_times

STEPS_PER_SAMPLE = 4
TOL_ORTHO = 1e-6


def _rotation(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True, eq=False)
class MovingFrame:
    """``vectors[i, a]`` is the a-th frame vector at ``base[i]``."""

    manifold: object
    base: np.ndarray
    vectors: np.ndarray
    holonomy: np.ndarray        # k x k matrix H with E(1) = E(0) H
    holonomy_angle: float       # rotation angle of H for k = 2, else nan

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_samples(self) -> int:
        return self.base.shape[0]


def _curve(center: ManifoldLoop):
    M = center.manifold
    loop = center.loop
    if isinstance(loop, FourierLoop):
        return (lambda t: loop(t)), (lambda t: loop(t, order=1))
    if isinstance(loop, GridLoop) and loop.interp == "cubic_periodic":
        spline = loop._spline

        def pos(t):
            return M._project(spline(np.mod(t, 1.0)))

        def vel(t):
            return M._tangent_project(pos(t), spline(np.mod(t, 1.0), 1))
        return pos, vel
    raise NonSmoothCenter("moving frames need a Fourier or cubic-spline centre")


def frame_along(center: ManifoldLoop, n_samples: int | None = None,
                steps_per_sample: int = STEPS_PER_SAMPLE) -> MovingFrame:
    """Holonomy-corrected parallel frame of alpha^*TM along ``center``."""
    if not center.smooth:
        raise NonSmoothCenter("moving frames need a smooth centre")
    M = center.manifold
    N = center.n_samples or n_samples or 256
    if n_samples is not None and n_samples != N:
        raise FrameMismatch(f"centre has {N} samples, asked for {n_samples}")
    pos, vel = _curve(center)

    def rhs(t, E):
        return M.projector_derivative(pos(t), vel(t), E)

    E0 = M.tangent_basis(pos(0.0))
    k = E0.shape[0]
    h = 1.0 / (N * steps_per_sample)
    frames = np.empty((N,) + E0.shape)
    E = E0.copy()
    t = 0.0
    for i in range(N):
        frames[i] = E
        for j in range(steps_per_sample):
            k1 = rhs(t, E)
            k2 = rhs(t + h / 2, E + h / 2 * k1)
            k3 = rhs(t + h / 2, E + h / 2 * k2)
            k4 = rhs(t + h, E + h * k3)
            E = E + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = (i * steps_per_sample + j + 1) * h
    # H[a, b] = <E0_a, E1_b>, so E1_b = sum_a H[a, b] E0_a
    H = E0 @ E.T
    if np.max(np.abs(H.T @ H - np.eye(k))) > TOL_ORTHO:
        raise HolonomyCorrectionFailure("transported frame lost orthonormality")
    if np.linalg.det(H) < 0:
        raise HolonomyCorrectionFailure("holonomy reverses orientation")
    times = grid_times(N)
    if k == 1:
        angle = float("nan")
        corr = np.ones((N, 1, 1))
    elif k == 2:
        angle = float(np.arctan2(H[1, 0], H[0, 0]))
        corr = np.stack([_rotation(-t * angle) for t in times])
    else:
        angle = float("nan")
        L = np.real(logm(H))
        corr = np.stack([expm(-t * L) for t in times])
    # corrected f_b(t) = sum_a E_a(t) C(t)[a, b]
    vectors = np.einsum("iak,iab->ibk", frames, corr)
    base = pos(times)
    # remove integrator drift: back to T_x M, then symmetric orthonormalization
    vectors = M._tangent_project(base[:, None, :], vectors)
    gram = np.einsum("iak,ibk->iab", vectors, vectors)
    w, U = np.linalg.eigh(gram)
    inv_sqrt = np.einsum("iab,ib,icb->iac", U, 1.0 / np.sqrt(w), U)
    vectors = np.einsum("iab,ibk->iak", inv_sqrt, vectors)
    return MovingFrame(M, base, vectors, H, angle)


def _check_frame(frame: MovingFrame, base):
    if base.shape != frame.base.shape or np.max(np.abs(base - frame.base)) > 1e-8:
        raise FrameMismatch("section is not based along the frame's centre")


def section_to_coords(frame: MovingFrame, section: PullbackSection) -> GridLoop:
    """Coordinates <v(t_i), f_a(t_i)> as an R^k-valued grid loop."""
    _check_frame(frame, section.base)
    return GridLoop(np.einsum("ik,iak->ia", section.vectors, frame.vectors), "cubic_periodic")


def coords_to_section(frame: MovingFrame, coords) -> PullbackSection:
    c = coords.samples if isinstance(coords, GridLoop) else np.asarray(coords, dtype=float)
    if c.shape != (frame.n_samples, frame.rank):
        raise FrameMismatch(f"coordinates of shape {c.shape}, expected {(frame.n_samples, frame.rank)}")
    return PullbackSection(frame.manifold, frame.base, np.einsum("ia,iak->ik", c, frame.vectors))
