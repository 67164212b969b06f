"""Seeded generators for test loops."""
from __future__ import annotations

import numpy as np

from .loops import DEFAULT_N, FourierLoop, GridLoop, ManifoldLoop, grid_times
from .manifold import EmbeddedManifold, FlatTorus2, UnitSphere

KINDS = ("fourier", "lipschitz", "triangle", "great-circle")


def fourier_random(rng: np.random.Generator, degree: int = 6, dim: int = 1) -> FourierLoop:
    """Random real trigonometric polynomial with coefficients decaying like 1/k^2."""
    cos = {k: rng.normal(size=dim) / k ** 2 for k in range(1, degree + 1)}
    sin = {k: rng.normal(size=dim) / k ** 2 for k in range(1, degree + 1)}
    return FourierLoop.from_trig(cos=cos, sin=sin, const=rng.normal(size=dim), dim=dim)


def lipschitz_random(rng: np.random.Generator, n_samples: int = DEFAULT_N, dim: int = 1,
                     lip: float = 4.0) -> GridLoop:
    """Sum of shifted triangle waves, piecewise linear, Lipschitz constant at most ``lip``."""
    t = grid_times(n_samples)
    out = np.zeros((n_samples, dim))
    weights = rng.dirichlet(np.ones(3))
    for w in weights:
        k = int(rng.integers(1, 4))
        phase = rng.uniform()
        # the triangle wave of frequency k has slope 4k
        tri = 2.0 * np.abs(np.mod(k * t + phase, 1.0) - 0.5)
        amp = w * lip / (4 * k)
        out += amp * tri[:, None] * rng.choice([-1.0, 1.0], size=dim)
    return GridLoop(out, "linear")


def triangle(n_samples: int = DEFAULT_N) -> GridLoop:
    """2|t - 1/2|, Lipschitz but not C^1."""
    t = grid_times(n_samples)
    return GridLoop((2.0 * np.abs(t - 0.5))[:, None], "linear")


def great_circle(M: EmbeddedManifold, rng: np.random.Generator) -> ManifoldLoop:
    """A closed geodesic through a random point, as a degree-1 Fourier loop."""
    if isinstance(M, FlatTorus2):
        a, b = rng.uniform(0, 2 * np.pi, size=2)
        k1, k2 = rng.integers(0, 2, size=2)
        if k1 == k2 == 0:
            k1 = 1
        # each factor runs around k_i times
        cos = {}
        sin = {}
        _add(cos, sin, k1, np.array([np.cos(a), np.sin(a), 0, 0]), np.array([-np.sin(a), np.cos(a), 0, 0]))
        _add(cos, sin, k2, np.array([0, 0, np.cos(b), np.sin(b)]), np.array([0, 0, -np.sin(b), np.cos(b)]))
        const = np.zeros(4)
        if k1 == 0:
            const[:2] = [np.cos(a), np.sin(a)]
        if k2 == 0:
            const[2:] = [np.cos(b), np.sin(b)]
        return ManifoldLoop(FourierLoop.from_trig(cos=cos, sin=sin, const=const, dim=4), M)
    if isinstance(M, UnitSphere):
        q, _ = np.linalg.qr(rng.normal(size=(M.ambient, 2)))
        return ManifoldLoop(FourierLoop.from_trig(cos={1: q[:, 0]}, sin={1: q[:, 1]}), M)
    raise ValueError(f"no closed geodesics on {M.name}")


def _add(cos, sin, k, c, s):
    if k == 0:
        return
    cos[int(k)] = cos.get(int(k), 0) + c
    sin[int(k)] = sin.get(int(k), 0) + s


def generate(kind: str, rng: np.random.Generator, manifold: EmbeddedManifold | None = None,
             n_samples: int = DEFAULT_N):
    if kind == "fourier":
        return fourier_random(rng)
    if kind == "lipschitz":
        return lipschitz_random(rng, n_samples)
    if kind == "triangle":
        return triangle(n_samples)
    if kind == "great-circle":
        if manifold is None:
            manifold = UnitSphere.sphere2()
        return great_circle(manifold, rng).loop
    raise ValueError(f"unknown kind {kind!r}; choose from {KINDS}")
