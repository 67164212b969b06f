"""Embedded manifolds with geodesic local additions.

Each manifold lives in some ambient R^n and exposes, in closed form,

* the tubular retraction ``project`` (identity on M),
* the tangent projector,
* the geodesic local addition ``exp`` and its inverse ``log``,
* Levi-Civita parallel transport along the geodesic ``t -> exp(t p)``.

All array arguments broadcast over leading axes; the last axis is the
ambient coordinate.  Manifolds are immutable and every method is pure.

A generic Newton inverse (:func:`log_newton`) and an RK4 transport
(:func:`transport_ode`) are provided as fallbacks and serve as independent
cross-checks of the closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    FiberMismatch,
    NewtonDivergence,
    NotOnManifold,
    OutsideTubularNeighbourhood,
    PairOutsideV,
    TangencyViolation,
)

TOL_TAN = 1e-10
TOL_GEO = 1e-9
TOL_ODE = 1e-6
DEFAULT_SAFETY = 0.9


def _norm(x):
    return np.linalg.norm(x, axis=-1)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


@dataclass(frozen=True)
class EmbeddedManifold:
    """Base class.  Subclasses fill in the closed forms."""

    name: str
    dim: int
    ambient: int
    r_inj: float
    eps_tub: float
    safety: float = DEFAULT_SAFETY
    tol_tan: float = TOL_TAN

    @property
    def compact(self) -> bool:
        return math.isfinite(self.r_inj)

    @property
    def spec(self) -> str:
        return self.name

    # -- closed forms, overridden ------------------------------------------
    def distance_to(self, x):
        """Ambient distance from ``x`` to M."""
        raise NotImplementedError

    def _project(self, x):
        raise NotImplementedError

    def _tangent_project(self, base, w):
        raise NotImplementedError

    def _exp(self, base, v):
        raise NotImplementedError

    def _log(self, u, q):
        raise NotImplementedError

    def geodesic_distance(self, u, q):
        raise NotImplementedError

    def _transport(self, u, p, w):
        raise NotImplementedError

    def tangent_basis(self, base):
        """Orthonormal basis of T_base M, shape (..., dim, ambient)."""
        raise NotImplementedError

    def projector_derivative(self, x, xdot, w):
        """(d/dt P(x(t))) w, the right-hand side of the transport ODE."""
        raise NotImplementedError

    def exp_velocity(self, u, p, t):
        """d/dt exp_u(t p)."""
        raise NotImplementedError

    def random_points(self, rng, size: int):
        raise NotImplementedError

    # -- checked public surface ---------------------------------------------
    def constraint_residual(self, x):
        x = np.asarray(x, dtype=float)
        return self.distance_to(x)

    def check_on_manifold(self, x, tol=None):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.ambient:
            raise NotOnManifold(f"expected ambient dimension {self.ambient}, got {x.shape[-1]}")
        tol = self.tol_tan if tol is None else tol
        res = np.max(self.constraint_residual(x), initial=0.0)
        if not np.all(np.isfinite(x)) or res > tol:
            raise NotOnManifold(f"{self.name}: constraint residual {res:.3e} > {tol:.1e}")
        return x

    def check_tangent(self, base, v, tol=None):
        v = np.asarray(v, dtype=float)
        tol = self.tol_tan if tol is None else tol
        res = np.max(_norm(v - self._tangent_project(base, v)), initial=0.0)
        if res > tol * max(1.0, float(np.max(_norm(v), initial=0.0))):
            raise TangencyViolation(f"{self.name}: normal component {res:.3e}")
        return v

    def project(self, x):
        x = np.asarray(x, dtype=float)
        d = self.distance_to(x)
        if np.any(~np.isfinite(d)) or np.any(d >= self.eps_tub):
            raise OutsideTubularNeighbourhood(
                f"{self.name}: distance {np.max(d):.3g} >= eps_tub {self.eps_tub:.3g}"
            )
        return self._project(x)

    def tangent_project(self, base, w):
        base = self.check_on_manifold(base)
        return self._tangent_project(base, np.asarray(w, dtype=float))

    def exp(self, base, v):
        base = self.check_on_manifold(base)
        v = self.check_tangent(base, v)
        return self._exp(base, v)

    def contains_pair(self, u, q):
        u = self.check_on_manifold(u)
        q = self.check_on_manifold(q)
        return self.geodesic_distance(u, q) < self.safety * self.r_inj

    def log(self, u, q):
        u = self.check_on_manifold(u)
        q = self.check_on_manifold(q)
        if not np.all(self.geodesic_distance(u, q) < self.safety * self.r_inj):
            raise PairOutsideV(f"{self.name}: pair is not in the diagonal neighbourhood V")
        return self._log(u, q)

    def transport(self, u, p, w):
        u = self.check_on_manifold(u)
        p = self.check_tangent(u, p)
        w = self.check_tangent(u, w)
        return self._transport(u, p, w)


# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Euclidean(EmbeddedManifold):
    @classmethod
    def of(cls, n: int, safety: float = DEFAULT_SAFETY):
        return cls(name=f"euclidean:{n}", dim=n, ambient=n, r_inj=math.inf,
                   eps_tub=math.inf, safety=safety)

    def distance_to(self, x):
        return np.zeros(np.shape(x)[:-1])

    def _project(self, x):
        return x

    def _tangent_project(self, base, w):
        return np.broadcast_to(w, np.broadcast_shapes(np.shape(base), np.shape(w))).copy()

    def _exp(self, base, v):
        return base + v

    def _log(self, u, q):
        return q - u

    def geodesic_distance(self, u, q):
        return _norm(np.asarray(q) - np.asarray(u))

    def _transport(self, u, p, w):
        return np.array(w, dtype=float)

    def tangent_basis(self, base):
        base = np.asarray(base, dtype=float)
        return np.broadcast_to(np.eye(self.ambient), base.shape[:-1] + (self.ambient, self.ambient)).copy()

    def projector_derivative(self, x, xdot, w):
        return np.zeros_like(w)

    def exp_velocity(self, u, p, t):
        return np.array(p, dtype=float)

    def random_points(self, rng, size: int):
        return rng.normal(size=(size, self.ambient))


@dataclass(frozen=True)
class UnitSphere(EmbeddedManifold):
    """Unit sphere S^{n-1} in R^n.  n = 2 is the circle, n = 3 is sphere2."""

    @classmethod
    def circle(cls, safety: float = DEFAULT_SAFETY):
        return cls(name="circle", dim=1, ambient=2, r_inj=math.pi, eps_tub=1.0, safety=safety)

    @classmethod
    def sphere2(cls, safety: float = DEFAULT_SAFETY):
        return cls(name="sphere2", dim=2, ambient=3, r_inj=math.pi, eps_tub=1.0, safety=safety)

    def distance_to(self, x):
        return np.abs(_norm(x) - 1.0)

    def _project(self, x):
        return x / _norm(x)[..., None]

    def _tangent_project(self, base, w):
        return w - _dot(base, w)[..., None] * base

    def _exp(self, base, v):
        theta = _norm(v)[..., None]
        # sin(theta)/theta without the 0/0
        return np.cos(theta) * base + np.sinc(theta / np.pi) * v

    def geodesic_distance(self, u, q):
        u = np.asarray(u, dtype=float)
        q = np.asarray(q, dtype=float)
        c = _dot(u, q)
        s = _norm(q - c[..., None] * u)
        return np.arctan2(s, c)

    def _log(self, u, q):
        c = _dot(u, q)
        w = q - c[..., None] * u
        s = _norm(w)
        theta = np.arctan2(s, c)
        with np.errstate(invalid="ignore", divide="ignore"):
            factor = np.where(s > 1e-300, theta / np.where(s > 0, s, 1.0), 1.0)
        return factor[..., None] * w

    def _transport(self, u, p, w):
        # Rodrigues rotation in the plane spanned by u and p
        theta = _norm(p)
        safe = np.where(theta > 0, theta, 1.0)[..., None]
        e = p / safe
        a = _dot(w, e)[..., None]
        moved = w - a * e + a * (-np.sin(theta)[..., None] * u + np.cos(theta)[..., None] * e)
        return np.where((theta > 0)[..., None], moved, w)

    def tangent_basis(self, base):
        base = np.asarray(base, dtype=float)
        if self.ambient == 2:
            e = np.stack([-base[..., 1], base[..., 0]], axis=-1)
            return e[..., None, :]
        # least-aligned coordinate axis, Gram-Schmidt, then u x e1
        idx = np.argmin(np.abs(base), axis=-1)
        axis = np.eye(3)[idx]
        e1 = axis - _dot(axis, base)[..., None] * base
        e1 = e1 / _norm(e1)[..., None]
        e2 = np.cross(base, e1)
        return np.stack([e1, e2], axis=-2)

    def projector_derivative(self, x, xdot, w):
        # P = I - x x^T on the unit sphere
        return -xdot * _dot(x, w)[..., None] - x * _dot(xdot, w)[..., None]

    def exp_velocity(self, u, p, t):
        theta = _norm(p)[..., None]
        return -theta * np.sin(t * theta) * u + np.cos(t * theta) * p

    def random_points(self, rng, size: int):
        x = rng.normal(size=(size, self.ambient))
        return x / _norm(x)[:, None]


@dataclass(frozen=True)
class FlatTorus2(EmbeddedManifold):
    """S^1 x S^1 embedded in R^4 as (cos a, sin a, cos b, sin b).

    The induced metric is flat, so every operation is two independent
    circle operations.
    """

    @classmethod
    def make(cls, safety: float = DEFAULT_SAFETY):
        return cls(name="flat-torus2", dim=2, ambient=4, r_inj=math.pi, eps_tub=1.0, safety=safety)

    @property
    def _circle(self):
        return UnitSphere.circle(self.safety)

    @staticmethod
    def _split(x):
        x = np.asarray(x, dtype=float)
        return x[..., :2], x[..., 2:]

    def _blockwise(self, fn, *args):
        parts = [self._split(a) for a in args]
        first = fn(*(p[0] for p in parts))
        second = fn(*(p[1] for p in parts))
        return np.concatenate([first, second], axis=-1)

    def distance_to(self, x):
        # tubular retraction normalizes each block; distance is the block
        # distances combined in quadrature
        a, b = self._split(x)
        return np.hypot(np.abs(_norm(a) - 1.0), np.abs(_norm(b) - 1.0))

    def _project(self, x):
        return self._blockwise(self._circle._project, x)

    def _tangent_project(self, base, w):
        base, w = np.broadcast_arrays(np.asarray(base, float), np.asarray(w, float))
        return self._blockwise(self._circle._tangent_project, base, w)

    def _exp(self, base, v):
        base, v = np.broadcast_arrays(np.asarray(base, float), np.asarray(v, float))
        return self._blockwise(self._circle._exp, base, v)

    def _log(self, u, q):
        u, q = np.broadcast_arrays(np.asarray(u, float), np.asarray(q, float))
        return self._blockwise(self._circle._log, u, q)

    def geodesic_distance(self, u, q):
        (ua, ub), (qa, qb) = self._split(u), self._split(q)
        c = self._circle
        return np.hypot(c.geodesic_distance(ua, qa), c.geodesic_distance(ub, qb))

    def _transport(self, u, p, w):
        u, p, w = np.broadcast_arrays(*(np.asarray(a, float) for a in (u, p, w)))
        return self._blockwise(self._circle._transport, u, p, w)

    def tangent_basis(self, base):
        a, b = self._split(base)
        zero = np.zeros_like(a)
        ea = np.concatenate([np.stack([-a[..., 1], a[..., 0]], -1), zero], -1)
        eb = np.concatenate([zero, np.stack([-b[..., 1], b[..., 0]], -1)], -1)
        return np.stack([ea, eb], axis=-2)

    def projector_derivative(self, x, xdot, w):
        x, xdot, w = np.broadcast_arrays(*(np.asarray(a, float) for a in (x, xdot, w)))
        return self._blockwise(self._circle.projector_derivative, x, xdot, w)

    def exp_velocity(self, u, p, t):
        u, p = np.broadcast_arrays(np.asarray(u, float), np.asarray(p, float))
        return self._blockwise(lambda uu, pp: self._circle.exp_velocity(uu, pp, t), u, p)

    def random_points(self, rng, size: int):
        a, b = rng.uniform(-np.pi, np.pi, size=(2, size))
        return self.from_angles(a, b)

    def angles(self, x):
        a, b = self._split(x)
        return np.arctan2(a[..., 1], a[..., 0]), np.arctan2(b[..., 1], b[..., 0])

    def from_angles(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        return np.stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b)], axis=-1)


def manifold_from_spec(spec: str, safety: float = DEFAULT_SAFETY) -> EmbeddedManifold:
    """Parse ``euclidean:<n>``, ``circle``, ``sphere2`` or ``flat-torus2``."""
    spec = spec.strip().lower()
    if spec.startswith("euclidean"):
        _, _, n = spec.partition(":")
        try:
            dim = int(n)
        except ValueError:
            raise ValueError(f"bad euclidean spec {spec!r}; expected 'euclidean:<n>'") from None
        if dim < 1:
            raise ValueError("euclidean dimension must be >= 1")
        return Euclidean.of(dim, safety)
    if spec == "circle":
        return UnitSphere.circle(safety)
    if spec == "sphere2":
        return UnitSphere.sphere2(safety)
    if spec in ("flat-torus2", "flat_torus2"):
        return FlatTorus2.make(safety)
    raise ValueError(f"unknown manifold spec {spec!r}")


# --------------------------------------------------------------------------
# Spec-level operations.  Thin wrappers so that call sites read like the
# mathematics: local_add(M, u, v) rather than M.exp(u, v).

def project_to_manifold(M: EmbeddedManifold, x):
    return M.project(x)


def tangent_project(M: EmbeddedManifold, base, w):
    return M.tangent_project(base, w)


def local_add(M: EmbeddedManifold, base, v):
    """eta(v) for v in T_base M; the geodesic exponential."""
    return M.exp(base, v)


def local_add_inverse(M: EmbeddedManifold, u, q):
    """(pi x eta)^{-1}(u, q): the tangent vector at u reaching q."""
    return M.log(u, q)


def diagonal_nbhd_contains(M: EmbeddedManifold, u, q):
    return M.contains_pair(u, q)


def parallel_transport(M: EmbeddedManifold, u, p, w):
    """Transport w from u to eta(p) along t -> eta(t p)."""
    p_norm = np.max(_norm(np.asarray(p, dtype=float)), initial=0.0)
    if not p_norm < M.r_inj:
        raise PairOutsideV(f"|p| = {p_norm:.3g} is not below the injectivity radius")
    return M.transport(u, p, w)


def log_newton(M: EmbeddedManifold, u, q, tol=1e-13, max_iter=50):
    """Iterative inverse of the local addition at a single pair.

    Gauss-Newton in tangent coordinates at ``u`` with a finite-difference
    Jacobian of ``exp``.  Used as a fallback and as a cross-check.
    """
    u = M.check_on_manifold(np.asarray(u, dtype=float))
    q = M.check_on_manifold(np.asarray(q, dtype=float))
    if not M.contains_pair(u, q):
        raise PairOutsideV("pair is not in the diagonal neighbourhood V")
    basis = M.tangent_basis(u)
    # start from the ambient chord projected to T_u M
    c = basis @ (q - u)
    h = 1e-7
    for _ in range(max_iter):
        r = M._exp(u, c @ basis) - q
        if np.linalg.norm(r) < tol:
            return c @ basis
        jac = np.empty((M.ambient, M.dim))
        for j in range(M.dim):
            dc = np.zeros(M.dim)
            dc[j] = h
            jac[:, j] = (M._exp(u, (c + dc) @ basis) - M._exp(u, (c - dc) @ basis)) / (2 * h)
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        c = c + step
        if not np.all(np.isfinite(c)):
            break
    r = M._exp(u, c @ basis) - q
    if np.linalg.norm(r) < 1e3 * tol:
        return c @ basis
    raise NewtonDivergence(f"Newton log did not converge (residual {np.linalg.norm(r):.3e})")


def rk4(f, y0, t0: float, t1: float, steps: int):
    """Classical fixed-step RK4 for y' = f(t, y)."""
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / steps
    t = t0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def transport_ode(M: EmbeddedManifold, u, p, w, steps: int = 64):
    """Parallel transport by integrating w' = (dP/dt) w along exp_u(t p)."""
    u = M.check_on_manifold(u)
    p = M.check_tangent(u, p)
    w = M.check_tangent(u, w)

    def rhs(t, y):
        x = M._exp(u, t * p)
        return M.projector_derivative(x, M.exp_velocity(u, p, t), y)

    return rk4(rhs, w, 0.0, 1.0, steps)


# --------------------------------------------------------------------------
@dataclass(frozen=True)
class VectorBundleDescriptor:
    """A vector bundle E -> M with a connection.

    ``kind`` is ``"tangent"`` (Levi-Civita transport) or ``"trivial"``
    (M x R^rank with the flat connection).
    """

    base: EmbeddedManifold
    kind: str = "tangent"
    rank: int | None = None
    connection: str = "levi_civita"

    def __post_init__(self):
        if self.kind not in ("tangent", "trivial"):
            raise ValueError(f"unknown bundle kind {self.kind!r}")
        if self.kind == "tangent" and self.rank is None:
            object.__setattr__(self, "rank", self.base.dim)
        if self.kind == "trivial":
            object.__setattr__(self, "connection", "flat")
        if self.rank is None or self.rank < 1:
            raise ValueError("bundle rank must be >= 1")

    @classmethod
    def tangent(cls, M: EmbeddedManifold):
        return cls(M, "tangent")

    @classmethod
    def trivial(cls, M: EmbeddedManifold, rank: int):
        return cls(M, "trivial", rank=rank, connection="flat")

    def check_fiber(self, u, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "tangent":
            if v.shape[-1] != self.base.ambient:
                raise FiberMismatch(f"fiber vector has length {v.shape[-1]}")
            try:
                self.base.check_tangent(u, v)
            except TangencyViolation as exc:
                raise FiberMismatch(str(exc)) from None
        elif v.shape[-1] != self.rank:
            raise FiberMismatch(f"fiber vector has length {v.shape[-1]}, rank is {self.rank}")
        return v

    def transport(self, u, p, w):
        if self.kind == "trivial":
            return np.array(w, dtype=float)
        return parallel_transport(self.base, u, p, w)


def bundle_local_add(B: VectorBundleDescriptor, u, p, v, w):
    """eta^E(u, p, v, w) = (eta(p), P(u, eta(p))(v + w))."""
    M = B.base
    u = M.check_on_manifold(u)
    v = B.check_fiber(u, v)
    w = B.check_fiber(u, w)
    x = local_add(M, u, p)
    if not np.all(M.contains_pair(u, x)):
        raise PairOutsideV("(u, eta(p)) is not in V")
    return x, B.transport(u, p, v + w)


def bundle_local_add_inverse(B: VectorBundleDescriptor, u, v, x, w):
    """Inverse of pi^E x eta^E: ((u, v), (x, w)) -> (p, v, P^{-1}(w) - v).

    P^{-1} is transport back along the reversed geodesic from x to u.
    """
    M = B.base
    p = local_add_inverse(M, u, x)
    v = B.check_fiber(u, v)
    w = B.check_fiber(x, w)
    back = B.transport(x, local_add_inverse(M, x, u), w)
    return p, v, back - v
