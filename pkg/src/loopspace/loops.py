"""Discretized loops S^1 -> R^n.

Two representations stand in for the loop classes:

``GridLoop``
    N uniform samples gamma(i/N) with linear or periodic-cubic
    interpolation.  Continuous (and Lipschitz) loops.
``FourierLoop``
    A real trigonometric polynomial given by complex coefficients
    c_k, |k| <= m.  Smooth loops: derivatives and rotations are exact.

The circle is R/Z throughout, so a loop is evaluated at t in [0, 1).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    CoverIncomplete,
    DerivativeUnavailable,
    DimensionMismatch,
    DomainViolation,
    InsufficientResolution,
    NotOnManifold,
    OverlapMismatch,
)

DEFAULT_N = 256
TOL_GLUE = 1e-9
MIN_SAMPLES = 8


class LoopClass(enum.Enum):
    C0 = "C0"
    LIPSCHITZ = "Lipschitz"
    SMOOTH = "Smooth"


def grid_times(n: int) -> np.ndarray:
    return np.arange(n) / n


def _as_times(t):
    return np.asarray(t, dtype=float)


@dataclass(frozen=True, eq=False)
class GridLoop:
    samples: np.ndarray
    interp: str = "linear"

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ValueError("samples must have shape (N, n)")
        if s.shape[0] < MIN_SAMPLES:
            raise InsufficientResolution(f"need at least {MIN_SAMPLES} samples, got {s.shape[0]}")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        if self.interp not in ("linear", "cubic_periodic"):
            raise ValueError(f"unknown interpolation {self.interp!r}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return grid_times(self.n_samples)

    @cached_property
    def _spline(self):
        s = self.samples
        closed = np.vstack([s, s[:1]])
        return CubicSpline(np.arange(self.n_samples + 1) / self.n_samples, closed,
                           bc_type="periodic", axis=0)

    def __call__(self, t):
        """Evaluate at t (scalar or array); returns shape (..., n)."""
        t = _as_times(t)
        N = self.n_samples
        x = np.mod(t, 1.0) * N
        # snap to nodes so that t = i/N hits the stored sample exactly
        r = np.rint(x)
        x = np.where(np.abs(x - r) < 1e-9, r, x)
        if self.interp == "cubic_periodic":
            return self._spline(x / N)
        i0 = np.floor(x).astype(int)
        frac = (x - i0)[..., None]
        i0 = np.mod(i0, N)
        i1 = np.mod(i0 + 1, N)
        return (1.0 - frac) * self.samples[i0] + frac * self.samples[i1]

    def with_samples(self, samples):
        return GridLoop(samples, self.interp)

    def __add__(self, other):
        if not isinstance(other, GridLoop) or other.samples.shape != self.samples.shape:
            return NotImplemented
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other):
        if not isinstance(other, GridLoop) or other.samples.shape != self.samples.shape:
            return NotImplemented
        return self.with_samples(self.samples - other.samples)

    def __mul__(self, a):
        return self.with_samples(float(a) * self.samples)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_samples(-self.samples)

    def lipschitz_constant(self) -> float:
        d = np.diff(np.vstack([self.samples, self.samples[:1]]), axis=0)
        return float(np.max(np.linalg.norm(d, axis=1)) * self.n_samples)


@dataclass(frozen=True, eq=False)
class FourierLoop:
    """Real trigonometric polynomial; ``coeffs[:, k + m]`` holds c_k."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 1:
            c = c[None, :]
        if c.ndim != 2 or c.shape[1] % 2 != 1:
            raise ValueError("coeffs must have shape (n, 2m+1)")
        m = c.shape[1] // 2
        # enforce the reality condition c_{-k} = conj(c_k) by symmetrizing
        sym = 0.5 * (c + np.conj(c[:, ::-1]))
        if np.max(np.abs(sym - c), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(c), initial=0.0)):
            raise ValueError("coefficients do not describe a real-valued loop")
        sym[:, m] = sym[:, m].real
        sym.setflags(write=False)
        object.__setattr__(self, "coeffs", sym)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] // 2

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    @property
    def wavenumbers(self) -> np.ndarray:
        m = self.degree
        return np.arange(-m, m + 1)

    @classmethod
    def zero(cls, dim: int = 1, degree: int = 0):
        return cls(np.zeros((dim, 2 * degree + 1), dtype=complex))

    @classmethod
    def constant(cls, value):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(value[:, None].astype(complex))

    @classmethod
    def from_trig(cls, cos=None, sin=None, const=None, dim=None):
        """Build from real cosine/sine amplitudes.

        ``cos`` and ``sin`` map wavenumber k >= 1 to an amplitude vector,
        so the loop is const + sum_k a_k cos(2 pi k t) + b_k sin(2 pi k t).
        """
        cos = dict(cos or {})
        sin = dict(sin or {})
        ks = list(cos) + list(sin)
        m = max(ks, default=0)
        if dim is None:
            probe = [np.atleast_1d(v) for v in list(cos.values()) + list(sin.values())]
            if const is not None:
                probe.append(np.atleast_1d(const))
            dim = len(probe[0]) if probe else 1
        c = np.zeros((dim, 2 * m + 1), dtype=complex)
        if const is not None:
            c[:, m] = np.broadcast_to(np.asarray(const, dtype=float), (dim,))
        for k, a in cos.items():
            a = np.broadcast_to(np.asarray(a, dtype=float), (dim,))
            c[:, m + k] += a / 2
            c[:, m - k] += a / 2
        for k, b in sin.items():
            b = np.broadcast_to(np.asarray(b, dtype=float), (dim,))
            c[:, m + k] += b / 2j
            c[:, m - k] -= b / 2j
        return cls(c)

    def derivative_coeffs(self, order: int) -> np.ndarray:
        return self.coeffs * (2j * np.pi * self.wavenumbers) ** order

    def derivative(self, order: int = 1) -> "FourierLoop":
        return FourierLoop(self.derivative_coeffs(order))

    def __call__(self, t, order: int = 0):
        t = np.mod(_as_times(t), 1.0)
        phase = np.exp(2j * np.pi * t[..., None] * self.wavenumbers)
        c = self.coeffs if order == 0 else self.derivative_coeffs(order)
        return np.real(phase @ c.T)

    def padded(self, degree: int) -> "FourierLoop":
        m = self.degree
        if degree < m:
            return FourierLoop(self.coeffs[:, m - degree: m + degree + 1])
        c = np.zeros((self.dim, 2 * degree + 1), dtype=complex)
        c[:, degree - m: degree + m + 1] = self.coeffs
        return FourierLoop(c)

    def _combine(self, other, sign):
        if not isinstance(other, FourierLoop) or other.dim != self.dim:
            return NotImplemented
        m = max(self.degree, other.degree)
        return FourierLoop(self.padded(m).coeffs + sign * other.padded(m).coeffs)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, a):
        return FourierLoop(float(a) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self):
        return FourierLoop(-self.coeffs)

    def lipschitz_constant(self) -> float:
        return _fourier_sup(self, 1)


Loop = GridLoop | FourierLoop


def evaluate(loop, t):
    return loop(t)


def class_tag(loop) -> LoopClass:
    if isinstance(loop, FourierLoop):
        return LoopClass.SMOOTH
    return LoopClass.C0 if loop.interp == "linear" else LoopClass.LIPSCHITZ


def is_member(loop, tag: LoopClass) -> bool:
    """Desk-scale membership predicate for the nested classes Smooth < Lipschitz < C0."""
    if tag is LoopClass.SMOOTH:
        return isinstance(loop, FourierLoop)
    if isinstance(loop, FourierLoop):
        return bool(np.all(np.isfinite(loop.coeffs)))
    ok = bool(np.all(np.isfinite(loop.samples)))
    if tag is LoopClass.LIPSCHITZ:
        return ok and math.isfinite(loop.lipschitz_constant())
    return ok


# --------------------------------------------------------------------------
# sup norms

def _sup_grid_size(degree: int) -> int:
    return max(64, 32 * (degree + 1))


def _fourier_sup(loop: FourierLoop, order: int) -> float:
    """sup_t |gamma^(order)(t)|, dense grid then Newton polish of the maxima."""
    c = loop.derivative_coeffs(order)
    if not np.any(np.abs(c) > 0):
        return 0.0
    k = loop.wavenumbers
    w = 2j * np.pi * k
    G = _sup_grid_size(loop.degree)
    t = grid_times(G)
    vals = np.real(np.exp(2j * np.pi * t[:, None] * k) @ c.T)
    h = np.sum(vals ** 2, axis=1)
    best = float(h.max())
    # local maxima of |f|^2 on the periodic grid
    peaks = np.flatnonzero((h >= np.roll(h, 1)) & (h >= np.roll(h, -1)))
    peaks = peaks[np.argsort(h[peaks])[::-1][:16]]
    c1, c2 = c * w, c * w ** 2
    ti = t[peaks].copy()
    active = np.ones(ti.shape, dtype=bool)
    for _ in range(20):
        e = np.exp(2j * np.pi * ti[:, None] * k)
        f0, f1, f2 = np.real(e @ c.T), np.real(e @ c1.T), np.real(e @ c2.T)
        g = 2 * np.sum(f0 * f1, axis=1)
        hess = 2 * (np.sum(f1 * f1, axis=1) + np.sum(f0 * f2, axis=1))
        active &= hess < 0
        step = np.where(active, -g / np.where(active, hess, -1.0), 0.0)
        step = np.clip(step, -0.5 / G, 0.5 / G)
        ti = ti + step
        active &= np.abs(step) >= 1e-16
        if not np.any(active):
            break
    e = np.exp(2j * np.pi * ti[:, None] * k)
    best = max(best, float(np.max(np.sum(np.real(e @ c.T) ** 2, axis=1), initial=0.0)))
    return math.sqrt(best)


def sup_norm(loop) -> float:
    if isinstance(loop, FourierLoop):
        return _fourier_sup(loop, 0)
    if loop.interp == "linear":
        # a piecewise-linear loop attains its sup at a node
        return float(np.max(np.linalg.norm(loop.samples, axis=1)))
    dense = loop(grid_times(16 * loop.n_samples))
    return float(np.max(np.linalg.norm(dense, axis=-1)))


def seminorm(loop, order: int = 0) -> float:
    """max_{0 <= j <= order} sup_t |gamma^(j)(t)|."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    if isinstance(loop, GridLoop):
        if order > 0:
            raise DerivativeUnavailable("C^k seminorms need the Fourier representation")
        return sup_norm(loop)
    return max(_fourier_sup(loop, j) for j in range(order + 1))


# --------------------------------------------------------------------------
# conversion

def to_grid(loop, n_samples: int = DEFAULT_N, interp: str | None = None) -> GridLoop:
    if isinstance(loop, GridLoop):
        if loop.n_samples == n_samples and (interp is None or interp == loop.interp):
            return loop
        return GridLoop(loop(grid_times(n_samples)), interp or loop.interp)
    return GridLoop(loop(grid_times(n_samples)), interp or "cubic_periodic")


def fourier_fit(loop, degree: int) -> tuple[FourierLoop, float]:
    """Trigonometric interpolation/truncation and its sup error on the grid."""
    if isinstance(loop, FourierLoop):
        fit = loop.padded(degree)
        return fit, _fourier_sup(loop - fit, 0) if degree < loop.degree else 0.0
    N = loop.n_samples
    if N < 2 * degree + 2:
        raise InsufficientResolution(f"grid of {N} samples cannot resolve degree {degree}")
    spec = np.fft.fft(loop.samples, axis=0) / N
    k = np.arange(-degree, degree + 1)
    fit = FourierLoop(spec[np.mod(k, N)].T)
    err = float(np.max(np.linalg.norm(fit(loop.times) - loop.samples, axis=1)))
    return fit, err


def convert(loop, target: str, size: int):
    """``target`` is ``"grid"`` (size = N) or ``"fourier"`` (size = degree m)."""
    if target == "grid":
        return to_grid(loop, size)
    if target == "fourier":
        return fourier_fit(loop, size)[0]
    raise ValueError(f"unknown target {target!r}")


# --------------------------------------------------------------------------
# components

def components(loop) -> list:
    if isinstance(loop, FourierLoop):
        return [FourierLoop(loop.coeffs[i: i + 1]) for i in range(loop.dim)]
    return [GridLoop(loop.samples[:, i: i + 1], loop.interp) for i in range(loop.dim)]


def join(parts: Sequence):
    if not parts:
        raise DimensionMismatch("cannot join an empty list")
    if all(isinstance(p, FourierLoop) for p in parts):
        m = max(p.degree for p in parts)
        return FourierLoop(np.vstack([p.padded(m).coeffs for p in parts]))
    if all(isinstance(p, GridLoop) for p in parts):
        sizes = {p.n_samples for p in parts}
        if len(sizes) != 1:
            raise DimensionMismatch(f"component grids differ: {sorted(sizes)}")
        return GridLoop(np.hstack([p.samples for p in parts]), parts[0].interp)
    raise DimensionMismatch("cannot join grid and Fourier components")


# --------------------------------------------------------------------------
# locality

@dataclass(frozen=True)
class ArcPiece:
    """A loop known only on the open arc (start, end) of R/Z.

    ``values`` holds the samples at the grid nodes lying in the arc,
    keyed by node index.
    """

    start: float
    end: float
    n_samples: int
    indices: np.ndarray
    values: np.ndarray

    def contains(self, t) -> np.ndarray:
        return _arc_contains(self.start, self.end, t)


def _arc_contains(a, b, t):
    t = np.mod(np.asarray(t, dtype=float), 1.0)
    if b <= a:
        b = b + 1.0
    if b - a >= 1.0:
        return np.ones_like(t, dtype=bool)
    # shift t into [a, a + 1)
    s = a + np.mod(t - a, 1.0)
    return (s > a) & (s < b)


def check_cover(cover: Sequence[tuple[float, float]]) -> None:
    """Raise CoverIncomplete unless the open arcs cover the whole circle."""
    if not cover:
        raise CoverIncomplete("empty cover")
    ends = sorted({float(np.mod(x, 1.0)) for arc in cover for x in arc})
    # coverage is constant between consecutive endpoints, so testing the
    # endpoints and the midpoints of the gaps is exhaustive
    mids = [(a + b) / 2 for a, b in zip(ends, ends[1:] + [ends[0] + 1.0])]
    for p in ends + mids:
        if not any(_arc_contains(a, b, p) for a, b in cover):
            raise CoverIncomplete(f"point t = {np.mod(p, 1.0):.6g} is not covered")


def restrict(loop, cover: Sequence[tuple[float, float]], n_samples: int = DEFAULT_N) -> list[ArcPiece]:
    t = grid_times(n_samples)
    values = loop(t)
    pieces = []
    for a, b in cover:
        idx = np.flatnonzero(_arc_contains(a, b, t))
        pieces.append(ArcPiece(a, b, n_samples, idx, values[idx]))
    return pieces


def locality_patch(cover: Sequence[tuple[float, float]], pieces: Sequence[ArcPiece],
                   tol_glue: float = TOL_GLUE, interp: str = "linear") -> GridLoop:
    """Glue loops given on the arcs of an open cover into one loop."""
    if len(cover) != len(pieces):
        raise ValueError("one piece per arc is required")
    check_cover(cover)
    sizes = {p.n_samples for p in pieces}
    if len(sizes) != 1:
        raise ValueError(f"pieces are sampled on different grids: {sorted(sizes)}")
    N = sizes.pop()
    dim = next(p.values.shape[1] for p in pieces if len(p.indices))
    out = np.full((N, dim), np.nan)
    for p in pieces:
        for i, v in zip(p.indices, p.values):
            if np.isnan(out[i, 0]):
                out[i] = v
            elif np.max(np.abs(out[i] - v)) > tol_glue:
                raise OverlapMismatch(
                    f"pieces disagree at t = {i / N:.6g} by {np.max(np.abs(out[i] - v)):.3e}"
                )
    if np.any(np.isnan(out)):
        missing = np.flatnonzero(np.isnan(out[:, 0]))[0]
        raise CoverIncomplete(f"no piece supplies node t = {missing / N:.6g}")
    return GridLoop(out, interp)


# --------------------------------------------------------------------------
# post-composition

@dataclass(frozen=True)
class SmoothMap:
    """A smooth map phi: U -> R^n given by a vectorized callable.

    ``domain`` is a predicate on arrays of points (..., m) returning a
    boolean array; ``None`` means U is all of R^m.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "phi"
    domain: Callable[[np.ndarray], np.ndarray] | None = None

    @classmethod
    def identity(cls):
        return cls(lambda x: np.array(x, dtype=float), "identity")

    @classmethod
    def linear(cls, A):
        A = np.asarray(A, dtype=float)
        return cls(lambda x: x @ A.T, "linear")


def postcompose(loop, phi: SmoothMap, degree: int | None = None,
                n_samples: int | None = None) -> tuple[object, float]:
    """phi o gamma.

    Grid loops are mapped samplewise (truncation error 0).  Fourier loops
    are sampled, mapped, and refit at ``degree``; the returned float is the
    sup error of the refit on the sampling grid.
    """
    if isinstance(loop, GridLoop):
        x = loop.samples
        _check_domain(phi, x)
        return GridLoop(np.atleast_2d(phi.fn(x)).reshape(len(x), -1), loop.interp), 0.0
    degree = loop.degree if degree is None else degree
    N = n_samples or max(DEFAULT_N, 4 * (2 * degree + 2))
    x = loop(grid_times(N))
    _check_domain(phi, x)
    mapped = GridLoop(np.asarray(phi.fn(x), dtype=float).reshape(N, -1), "cubic_periodic")
    return fourier_fit(mapped, degree)


def _check_domain(phi: SmoothMap, x):
    if phi.domain is not None and not np.all(phi.domain(x)):
        raise DomainViolation(f"loop leaves the domain of {phi.name}")


# --------------------------------------------------------------------------
# manifold-valued loops

@dataclass(frozen=True, eq=False)
class ManifoldLoop:
    """A loop in R^n whose values lie on the embedded manifold M.

    ``smooth`` marks loops known to be smooth maps even when stored as
    samples (e.g. the output of the manifold mollifier).
    """

    loop: object
    manifold: object
    smooth: bool = field(default=False)

    def __post_init__(self):
        M = self.manifold
        if self.loop.dim != M.ambient:
            raise NotOnManifold(f"loop dimension {self.loop.dim} != ambient {M.ambient}")
        if isinstance(self.loop, FourierLoop):
            object.__setattr__(self, "smooth", True)
            pts = self.loop(grid_times(_sup_grid_size(self.loop.degree)))
        else:
            pts = self.loop.samples
        M.check_on_manifold(pts)

    def __call__(self, t):
        return self.loop(t)

    @property
    def dim(self):
        return self.loop.dim

    def samples(self, n_samples: int | None = None) -> np.ndarray:
        from .errors import GridMismatch

        if isinstance(self.loop, GridLoop):
            if n_samples is not None and n_samples != self.loop.n_samples:
                raise GridMismatch(f"loop has {self.loop.n_samples} samples, expected {n_samples}")
            return self.loop.samples
        return self.loop(grid_times(n_samples or DEFAULT_N))

    @property
    def n_samples(self) -> int | None:
        return self.loop.n_samples if isinstance(self.loop, GridLoop) else None

    def class_tag(self) -> LoopClass:
        return LoopClass.SMOOTH if self.smooth else class_tag(self.loop)


# --------------------------------------------------------------------------
# JSON loop files

def _fmt(x) -> float:
    # json writes floats via repr, which round-trips doubles exactly
    return float(x)


def loop_to_dict(loop) -> dict:
    if isinstance(loop, GridLoop):
        return {"kind": "grid", "dim": loop.dim, "interp": loop.interp,
                "samples": [[_fmt(v) for v in row] for row in loop.samples]}
    c = loop.coeffs
    return {"kind": "fourier", "dim": loop.dim, "degree": loop.degree,
            "coeffs": {"re": [[_fmt(v) for v in row] for row in c.real],
                       "im": [[_fmt(v) for v in row] for row in c.imag]}}


def loop_from_dict(d: dict):
    try:
        kind = d["kind"]
        dim = int(d["dim"])
        if kind == "grid":
            loop = GridLoop(np.asarray(d["samples"], dtype=float), d.get("interp", "linear"))
        elif kind == "fourier":
            re = np.asarray(d["coeffs"]["re"], dtype=float)
            im = np.asarray(d["coeffs"]["im"], dtype=float)
            loop = FourierLoop(re + 1j * im)
            if "degree" in d and int(d["degree"]) != loop.degree:
                raise ValueError(f"declared degree {d['degree']} != {loop.degree}")
        else:
            raise ValueError(f"unknown loop kind {kind!r}")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed loop record: {exc}") from None
    if loop.dim != dim:
        raise ValueError(f"declared dim {dim} != {loop.dim}")
    return loop


def dumps_loop(loop) -> str:
    return json.dumps(loop_to_dict(loop), separators=(",", ":"))


def loads_loop(text: str):
    return loop_from_dict(json.loads(text))
