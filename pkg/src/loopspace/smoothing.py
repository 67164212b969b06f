"""Mollifier smoothing of continuous loops.

Pipeline for a continuous loop gamma in R^n and a closeness target eps:

1. ``delta_of``: a width delta such that samples closer than delta differ
   by less than eps (certified on the quadrature grid).
2. ``mollify``: periodic convolution with the unit-mass bump of half-width
   delta.  The result is smooth and uniformly eps-close to gamma.
3. ``mollify_to_manifold``: for loops on a compact M, run 2 with the
   manifold's eps_M and retract pointwise; every pair
   (gamma(t), R_M(gamma)(t)) then lies in the diagonal neighbourhood V.
4. ``homotopy_eval``: H(gamma, s) = exp(s * log(R_M(gamma), gamma)),
   joining R_M(gamma) (s = 0) to gamma (s = 1).
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import (
    NoAdmissibleConstants,
    NoCompactness,
    NotBased,
    PairOutsideV,
    ResolutionTooCoarse,
)
from .loops import TOL_GLUE, FourierLoop, GridLoop, ManifoldLoop, grid_times, to_grid
from .manifold import EmbeddedManifold

log = logging.getLogger(__name__)

DELTA_SAFETY = 0.5
DELTA_CAP = 0.25
QUADRATURE_FACTOR = 4


# --------------------------------------------------------------------------
# bump functions

def _raw_bump(t):
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1.0
    out = np.zeros_like(t)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


@functools.lru_cache(maxsize=None)
def _bump_mass() -> float:
    mass, _ = quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), -1.0, 1.0,
                   epsabs=1e-13, epsrel=1e-13, limit=200)
    return mass


def bump(t, order: int = 0):
    """Standard bump c * exp(-1/(1 - t^2)) on (-1, 1), unit integral.

    ``order`` 0 or 1 selects the function or its derivative.
    """
    t = np.asarray(t, dtype=float)
    phi = _raw_bump(t) / _bump_mass()
    if order == 0:
        return phi
    if order == 1:
        inside = np.abs(t) < 1.0
        out = np.zeros_like(t)
        ti = t[inside]
        out[inside] = phi[inside] * (-2.0 * ti / (1.0 - ti * ti) ** 2)
        return out
    raise ValueError("only orders 0 and 1 are available")


def scaled_bump(t, r: float, order: int = 0):
    """phi_r(t) = phi(t/r)/r, supported in [-r, r] with unit integral."""
    return bump(np.asarray(t, dtype=float) / r, order) / r ** (order + 1)


def kernel_mass(r: float) -> float:
    """Adaptive-quadrature integral of phi_r; 1 up to quadrature error."""
    mass, _ = quad(lambda t: float(scaled_bump(t, r)), -r, r, epsabs=1e-13, epsrel=1e-13, limit=200)
    return mass


def _smooth_step(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)


def plateau(x):
    """tau: 1 on (-inf, 1], 0 on [2, inf), smooth and monotone in between."""
    x = np.asarray(x, dtype=float)
    a = _smooth_step(2.0 - x)
    b = _smooth_step(x - 1.0)
    return a / (a + b)


# --------------------------------------------------------------------------
# manifold constants

@dataclass(frozen=True)
class ManifoldConstants:
    """mu and eps_M with the sampled evidence behind them."""

    mu: float
    eps_M: float
    pairs_tested: int
    points_tested: int
    certificate: dict = field(default_factory=dict, compare=False)


@functools.lru_cache(maxsize=None)
def manifold_constants(M: EmbeddedManifold, n_pairs: int = 10_000, seed: int = 0) -> ManifoldConstants:
    """Find mu, eps_M for a compact M by sampled search.

    mu: |x - y| < mu on M implies (x, y) in V.
    eps_M: x on M, |x - y| < eps_M implies y in the tubular neighbourhood
    and |x - p(y)| < mu.
    """
    if not M.compact:
        raise NoCompactness(f"{M.name} is not compact")
    rng = np.random.default_rng(seed)
    half = n_pairs // 2
    u = M.random_points(rng, n_pairs)
    q = M.random_points(rng, n_pairs)
    # half of the pairs are pushed onto the boundary of V, where the
    # shortest chord outside V is attained
    basis = M.tangent_basis(u[:half])
    dirs = np.einsum("ij,ijk->ik", rng.normal(size=(half, M.dim)), basis)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    q[:half] = M._exp(u[:half], M.safety * M.r_inj * dirs)
    chord = np.linalg.norm(u - q, axis=1)
    in_v = M.geodesic_distance(u, q) < M.safety * M.r_inj
    if np.all(in_v):
        raise NoAdmissibleConstants("sampled pairs never left V; cannot bound mu")
    mu = 0.9 * float(chord[~in_v].min())
    violations = int(np.sum((chord < mu) & ~in_v))
    if mu <= 0 or violations:
        raise NoAdmissibleConstants(f"mu search failed ({violations} violations)")

    x = M.random_points(rng, n_pairs)
    eps = 0.9 * min(M.eps_tub, mu / 2)
    for _ in range(40):
        step = rng.normal(size=x.shape)
        step /= np.linalg.norm(step, axis=1, keepdims=True)
        radius = eps * np.sqrt(rng.uniform(0.0, 1.0, size=(len(x), 1)))
        radius[: len(x) // 4] = eps * (1 - 1e-12)
        y = x + radius * step
        ok_tub = M.distance_to(y) < M.eps_tub
        ok_mu = np.zeros(len(x), dtype=bool)
        ok_mu[ok_tub] = np.linalg.norm(x[ok_tub] - M._project(y[ok_tub]), axis=1) < mu
        if np.all(ok_tub & ok_mu):
            break
        eps /= 2
    else:
        raise NoAdmissibleConstants("no eps_M certified")
    cert = {"manifold": M.name, "mu": mu, "eps_M": eps,
            "min_chord_outside_V": float(chord[~in_v].min()),
            "pairs_outside_V": int(np.sum(~in_v))}
    log.info("manifold constants certified: %s", cert)
    return ManifoldConstants(mu, eps, n_pairs, n_pairs, cert)


# --------------------------------------------------------------------------
# modulus of continuity

def _fine_samples(loop, quadrature: int | None) -> tuple[np.ndarray, int]:
    if isinstance(loop, FourierLoop):
        Q = quadrature or QUADRATURE_FACTOR * 256
        return loop(grid_times(Q)), Q
    N = loop.n_samples
    Q = quadrature or QUADRATURE_FACTOR * N
    if Q < QUADRATURE_FACTOR * N or Q % N:
        raise ValueError(f"quadrature {Q} must be a multiple of N = {N} and at least {QUADRATURE_FACTOR}N")
    return loop(grid_times(Q)), Q


def modulus_profile(g: np.ndarray, max_lag: int) -> np.ndarray:
    """Omega[m] = max over lags l <= m of max_j |g[j + l] - g[j]| (periodic)."""
    out = np.zeros(max_lag + 1)
    for lag in range(1, max_lag + 1):
        out[lag] = np.max(np.linalg.norm(np.roll(g, -lag, axis=0) - g, axis=1))
    return np.maximum.accumulate(out)


def certify_delta(loop, eps: float, delta: float, quadrature: int | None = None) -> bool:
    """Do all quadrature nodes closer than delta differ by less than eps?"""
    g, Q = _fine_samples(loop, quadrature)
    lag = min(max(math.ceil(delta * Q) - 1, 0), Q // 2)
    return bool(modulus_profile(g, lag)[lag] < eps)


def delta_of(loop, eps: float, quadrature: int | None = None) -> float:
    """Width delta with |gamma(s) - gamma(t)| < eps whenever |s - t| < 2 delta.

    Certified on the quadrature grid, then halved (``DELTA_SAFETY``) and
    capped at 1/4.  The result is always at least one grid spacing 1/N.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    g, Q = _fine_samples(loop, quadrature)
    max_lag = Q // 4
    omega = modulus_profile(g, max_lag)
    good = np.flatnonzero(omega < eps)
    m = int(good[-1])
    delta = DELTA_CAP if m == max_lag else DELTA_SAFETY * (m + 1) / Q
    n_grid = loop.n_samples if isinstance(loop, GridLoop) else Q // QUADRATURE_FACTOR
    if delta < 1.0 / n_grid:
        raise ResolutionTooCoarse(
            f"eps = {eps:g} needs delta = {delta:.3g} below the grid spacing 1/{n_grid}"
        )
    return float(delta)


# --------------------------------------------------------------------------
# mollifier

@dataclass(frozen=True, eq=False)
class Mollifier:
    """gamma * phi_r realized on the quadrature grid.

    As a function of t, ``at`` evaluates
    R(t) = sum_i g_i phi_r(t - s_i) / (Q S),
    where S normalizes the discrete kernel mass to exactly 1; this is a
    smooth periodic function whose derivative is the same sum with phi_r'.
    """

    fine: np.ndarray
    radius: float
    eps: float | None = None

    @property
    def quadrature(self) -> int:
        return self.fine.shape[0]

    @functools.cached_property
    def _lags(self):
        Q = self.quadrature
        L = min(math.ceil(self.radius * Q), Q // 2)
        return np.arange(-L, L + 1)

    @functools.cached_property
    def _mass(self) -> float:
        return float(np.sum(scaled_bump(self._lags / self.quadrature, self.radius)) / self.quadrature)

    def weights(self, order: int = 0) -> np.ndarray:
        Q = self.quadrature
        return scaled_bump(self._lags / Q, self.radius, order) / (Q * self._mass)

    def samples(self, method: str = "direct") -> np.ndarray:
        w = self.weights()
        g = self.fine
        if method == "direct":
            out = np.zeros_like(g)
            for lag, wl in zip(self._lags, w):
                if wl:
                    out += wl * np.roll(g, lag, axis=0)
            return out
        if method == "fft":
            Q = self.quadrature
            k = np.zeros(Q)
            np.add.at(k, np.mod(self._lags, Q), w)
            return np.real(np.fft.ifft(np.fft.fft(g, axis=0) * np.fft.fft(k)[:, None], axis=0))
        raise ValueError(f"unknown convolution method {method!r}")

    def at(self, t, order: int = 0) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        Q = self.quadrature
        s = grid_times(Q)
        diff = t[:, None] - s[None, :]
        diff = diff - np.rint(diff)
        K = scaled_bump(diff, self.radius, order) / (Q * self._mass)
        return K @ self.fine

    @property
    def loop(self) -> GridLoop:
        return GridLoop(self.samples(), "cubic_periodic")


def mollifier(loop, eps: float, quadrature: int | None = None, delta: float | None = None) -> Mollifier:
    g, Q = _fine_samples(loop, quadrature)
    r = delta_of(loop, eps, Q) if delta is None else float(delta)
    return Mollifier(g, r, eps)


def mollify(loop, eps: float, quadrature: int | None = None, method: str = "direct") -> GridLoop:
    """Smooth loop within eps of ``loop`` in sup norm, sampled at Q points."""
    return GridLoop(mollifier(loop, eps, quadrature).samples(method), "cubic_periodic")


def fourier_tail(loop: GridLoop, degree: int) -> float:
    """Largest coefficient magnitude beyond ``degree``."""
    c = np.fft.rfft(loop.samples, axis=0) / loop.n_samples
    return float(np.max(np.abs(c[degree + 1:]), initial=0.0))


def mollify_based(loop, eps: float, quadrature: int | None = None) -> GridLoop:
    """R_0(gamma) = R(gamma) - R(gamma)(0), run with eps/2."""
    if float(np.max(np.abs(loop(0.0)))) > TOL_GLUE:
        raise NotBased(f"gamma(0) = {np.asarray(loop(0.0)).ravel()} is not the origin")
    smooth = mollify(loop, eps / 2, quadrature).samples
    return GridLoop(smooth - smooth[0], "cubic_periodic")


# --------------------------------------------------------------------------
# manifold loops

def _as_grid(mloop: ManifoldLoop) -> GridLoop:
    if isinstance(mloop.loop, GridLoop):
        return mloop.loop
    return to_grid(mloop.loop)


def mollify_to_manifold(mloop: ManifoldLoop, eps: float | None = None,
                        quadrature: int | None = None) -> ManifoldLoop:
    """R_M(gamma) = p(R(gamma)), sampled on gamma's grid.

    For compact M the closeness target is eps_M (or ``eps`` if smaller);
    for Euclidean space, where V is everything, ``eps`` defaults to 0.1.
    """
    M = mloop.manifold
    if M.compact:
        consts = manifold_constants(M)
        target = consts.eps_M if eps is None else min(eps, consts.eps_M)
    else:
        target = 0.1 if eps is None else eps
    grid = _as_grid(mloop)
    fine = mollify(grid, target, quadrature).samples
    stride = fine.shape[0] // grid.n_samples
    coarse = M.project(fine[::stride])
    ok = M.contains_pair(grid.samples, coarse)
    if not np.all(ok):
        raise PairOutsideV(f"{int(np.sum(~ok))} samples of R_M(gamma) leave V")
    return ManifoldLoop(GridLoop(coarse, "cubic_periodic"), M, smooth=True)


def homotopy_eval(mloop: ManifoldLoop, s: float, center: ManifoldLoop | None = None) -> ManifoldLoop:
    """H(gamma, s) = eta(s * eta^{-1}(R_M(gamma), gamma)) samplewise."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    M = mloop.manifold
    if center is None:
        center = mollify_to_manifold(mloop)
    grid = _as_grid(mloop)
    base = center.samples(grid.n_samples)
    v = M.log(base, grid.samples)
    return ManifoldLoop(GridLoop(M._exp(base, s * v), grid.interp), M, smooth=(s == 0.0))
