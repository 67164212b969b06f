"""Based loops via a tubular neighbourhood of a submanifold P of M.

A tubular neighbourhood U of P is identified with the normal bundle N -> P
through phi: U -> N.  For a normal vector v the vertical field

    X_v(u) = -tau(|u|^2 / (1 + |v|^2)) s(v)(pi(u))

has time-one flow Psi_v sending v to the zero section.  Transporting a loop
by Psi_{phi(alpha(0))} therefore produces a loop based in P, and the pair
(based loop, v) trivializes evaluation at zero over U.

Two desk-scale setups are provided: P a single point of M, and P the
circle {b = b0} inside the flat torus.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import BasepointOutsideU, FiberMismatch, PartitionDefect
from .loops import GridLoop, ManifoldLoop
from .manifold import EmbeddedManifold, FlatTorus2, rk4
from .smoothing import plateau

FLOW_STEPS = 64
TOL_PARTITION = 1e-10
FIBER_RADIUS = 2.2


@dataclass(frozen=True)
class PartitionTriple:
    """(rho, nu): rho a function on P, nu(x) an r x r trivializing matrix."""

    rho: Callable
    nu: Callable

    def nu_inv(self, x):
        return np.linalg.inv(self.nu(x))


def check_partition(triples: Sequence[PartitionTriple], points) -> float:
    """Max |sum rho^2 - 1| over ``points``; raises PartitionDefect above tolerance."""
    total = sum(np.asarray(tr.rho(points), dtype=float) ** 2 for tr in triples)
    defect = float(np.max(np.abs(total - 1.0)))
    if defect > TOL_PARTITION:
        raise PartitionDefect(f"sum of rho^2 deviates from 1 by {defect:.3e}")
    return defect


@dataclass(frozen=True)
class SectionField:
    """s(v)(x) = sum_lambda rho(b) rho(x) nu(x)^{-1} nu(b) v for v over b."""

    triples: tuple
    base: np.ndarray
    vector: np.ndarray

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + self.vector.shape)
        for tr in self.triples:
            local = tr.nu(self.base) @ self.vector
            back = np.einsum("...ij,j->...i", np.linalg.inv(tr.nu(x)), local)
            w = np.asarray(tr.rho(self.base)) * np.asarray(tr.rho(x))
            out = out + w[..., None] * back
        return out


def section_field(triples: Sequence[PartitionTriple], base, v, check_points=None) -> SectionField:
    base = np.asarray(base, dtype=float)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if check_points is not None:
        check_partition(triples, check_points)
    check_partition(triples, base[None])
    r = np.asarray(triples[0].nu(base)).shape[0]
    if v.shape != (r,):
        raise FiberMismatch(f"fibre vector of shape {v.shape}, rank is {r}")
    return SectionField(tuple(triples), base, v)


# --------------------------------------------------------------------------
# tubular neighbourhoods

class Tube:
    """phi: U -> N for P inside M, plus the partition data on P."""

    manifold: EmbeddedManifold
    rank: int
    fiber_radius: float

    def to_normal(self, x):
        """(base points in P, fibre coordinates); valid on U."""
        raise NotImplementedError

    def from_normal(self, b, u):
        raise NotImplementedError

    def in_u(self, x) -> np.ndarray:
        raise NotImplementedError

    def partition(self) -> list[PartitionTriple]:
        raise NotImplementedError

    def sample_p(self, n: int):
        raise NotImplementedError

    def admissible(self, v) -> np.ndarray:
        """Normal vectors whose field X_v vanishes before the edge of U."""
        v = np.asarray(v, dtype=float)
        return 2.0 * (1.0 + np.sum(v * v, axis=-1)) < self.fiber_radius ** 2


@dataclass(frozen=True)
class PointTube(Tube):
    """P = {x0}; phi(x) = c * (coordinates of log_{x0}(x))."""

    manifold: EmbeddedManifold
    x0: np.ndarray

    @property
    def rank(self) -> int:
        return self.manifold.dim

    @property
    def radius(self) -> float:
        """Geodesic radius of U."""
        M = self.manifold
        return float(M.safety * M.r_inj)

    @property
    def scale(self) -> float:
        return 1.0 if not np.isfinite(self.radius) else FIBER_RADIUS / self.radius

    @property
    def fiber_radius(self) -> float:
        return self.scale * self.radius

    @property
    def _basis(self):
        return self.manifold.tangent_basis(self.x0)

    def in_u(self, x):
        return self.manifold.geodesic_distance(self.x0, x) < self.radius

    def to_normal(self, x):
        x = np.asarray(x, dtype=float)
        x0 = np.broadcast_to(self.x0, x.shape)
        u = self.scale * (self.manifold._log(x0, x) @ self._basis.T)
        return x0, u

    def from_normal(self, b, u):
        u = np.asarray(u, dtype=float)
        x0 = np.broadcast_to(self.x0, u.shape[:-1] + self.x0.shape)
        return self.manifold._exp(x0, (u / self.scale) @ self._basis)

    def partition(self):
        r = self.rank
        return [PartitionTriple(lambda x: np.ones(np.shape(x)[:-1]),
                                lambda x: np.broadcast_to(np.eye(r), np.shape(x)[:-1] + (r, r)))]

    def sample_p(self, n: int):
        return np.broadcast_to(self.x0, (n,) + self.x0.shape)


@dataclass(frozen=True)
class TorusCircleTube(Tube):
    """P = {(a, b0)} in the flat torus, N trivialized with two charts."""

    manifold: FlatTorus2
    b0: float = 0.0

    rank = 1

    @property
    def radius(self) -> float:
        return float(self.manifold.safety * np.pi)

    @property
    def scale(self) -> float:
        return FIBER_RADIUS / self.radius

    @property
    def fiber_radius(self) -> float:
        return FIBER_RADIUS

    def _offset(self, x):
        _, b = self.manifold.angles(x)
        return np.mod(b - self.b0 + np.pi, 2 * np.pi) - np.pi

    def in_u(self, x):
        return np.abs(self._offset(x)) < self.radius

    def to_normal(self, x):
        x = np.asarray(x, dtype=float)
        a, _ = self.manifold.angles(x)
        base = self.manifold.from_angles(a, np.full_like(a, self.b0))
        return base, (self.scale * self._offset(x))[..., None]

    def from_normal(self, b, u):
        a, _ = self.manifold.angles(b)
        return self.manifold.from_angles(a, self.b0 + np.asarray(u)[..., 0] / self.scale)

    def partition(self):
        M = self.manifold

        def h(x):
            a, _ = M.angles(x)
            # smooth step: 0 at a = 0, 1 at a = pi
            return 1.0 - plateau(1.0 + (1.0 - np.cos(a)) / 2.0)

        def nu2(x):
            a, _ = M.angles(x)
            return (2.0 + np.sin(a))[..., None, None]

        return [
            PartitionTriple(lambda x: np.cos(np.pi / 2 * h(x)),
                            lambda x: np.ones(np.shape(x)[:-1] + (1, 1))),
            PartitionTriple(lambda x: np.sin(np.pi / 2 * h(x)), nu2),
        ]

    def sample_p(self, n: int):
        a = 2 * np.pi * np.arange(n) / n
        return self.manifold.from_angles(a, np.full(n, self.b0))


# --------------------------------------------------------------------------
# vertical flows

@dataclass(frozen=True)
class VerticalFlow:
    """Time-one flow Psi_v of X_v, acting on fibres and on points of M."""

    tube: Tube
    field: SectionField
    steps: int = FLOW_STEPS

    @property
    def v(self) -> np.ndarray:
        return self.field.vector

    def _flow_fiber(self, b, u, sign):
        # base point is constant along the vertical flow
        s = self.field(b)
        scale = 1.0 + float(np.dot(self.v, self.v))

        def f(t, y):
            tau = plateau(np.sum(y * y, axis=-1) / scale)
            return -sign * tau[..., None] * s
        return rk4(f, u, 0.0, 1.0, self.steps)

    def apply_fiber(self, b, u):
        return self._flow_fiber(np.asarray(b, dtype=float), np.asarray(u, dtype=float), 1.0)

    def inverse_fiber(self, b, u):
        return self._flow_fiber(np.asarray(b, dtype=float), np.asarray(u, dtype=float), -1.0)

    def _on_points(self, x, sign):
        x = np.asarray(x, dtype=float)
        inside = self.tube.in_u(x)
        out = x.copy()
        if np.any(inside):
            b, u = self.tube.to_normal(x[inside])
            out[inside] = self.tube.from_normal(b, self._flow_fiber(b, u, sign))
        return out

    def __call__(self, x):
        return self._on_points(x, 1.0)

    def inverse(self, x):
        return self._on_points(x, -1.0)


def vertical_flow(tube: Tube, b, v, steps: int = FLOW_STEPS) -> VerticalFlow:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if not tube.admissible(v):
        raise BasepointOutsideU(f"|v| = {np.linalg.norm(v):.3f} exceeds the admissible fibre radius")
    field = section_field(tube.partition(), b, v, check_points=tube.sample_p(64))
    return VerticalFlow(tube, field, steps)


# --------------------------------------------------------------------------
# based trivialization

@dataclass(frozen=True)
class NormalVector:
    base: np.ndarray
    vector: np.ndarray


def evaluate_at_zero(loop) -> np.ndarray:
    if isinstance(loop, ManifoldLoop):
        loop = loop.loop
    if isinstance(loop, GridLoop):
        return loop.samples[0].copy()
    return np.asarray(loop(0.0), dtype=float)


def _basepoint_normal(tube: Tube, x):
    x = np.asarray(x, dtype=float)
    if not tube.in_u(x[None])[0]:
        raise BasepointOutsideU("basepoint lies outside the tubular neighbourhood")
    b, u = tube.to_normal(x[None])
    if not tube.admissible(u[0]):
        raise BasepointOutsideU("basepoint is too far from P for the vertical flow")
    return NormalVector(b[0], u[0])


def based_trivialize(alpha: ManifoldLoop, tube: Tube) -> tuple[ManifoldLoop, NormalVector]:
    """alpha -> (Psi_v o alpha, v) with v = phi(alpha(0)); the loop is based in P."""
    if alpha.manifold != tube.manifold:
        raise FiberMismatch("loop and tube live on different manifolds")
    nv = _basepoint_normal(tube, evaluate_at_zero(alpha))
    flow = vertical_flow(tube, nv.base, nv.vector)
    grid = alpha.loop if isinstance(alpha.loop, GridLoop) else GridLoop(alpha.samples(), "linear")
    moved = flow(grid.samples)
    return ManifoldLoop(GridLoop(moved, grid.interp), alpha.manifold), nv


def based_untrivialize(beta: ManifoldLoop, nv: NormalVector, tube: Tube) -> ManifoldLoop:
    flow = vertical_flow(tube, nv.base, nv.vector)
    grid = beta.loop if isinstance(beta.loop, GridLoop) else GridLoop(beta.samples(), "linear")
    return ManifoldLoop(GridLoop(flow.inverse(grid.samples), grid.interp), beta.manifold)
