"""Charts on the loop space and their transition maps.

A chart is centred at a smooth loop alpha on M.  Its model space is the
space of sections of alpha^*TM, sampled here on alpha's grid: a
``PullbackSection`` stores one tangent vector at each alpha(t_i).

    chart_forward   section  -> loop      t -> exp(alpha(t), v(t))
    chart_inverse   loop     -> section   t -> log(alpha(t), beta(t))

Transitions between two charts act pointwise,
theta_1(t, v) = log(alpha_2(t), exp(alpha_1(t), v)).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    DomainExit,
    GridMismatch,
    LoopSpaceError,
    NonSmoothCenter,
    OutsideW12,
    PairOutsideV,
)
from .loops import DEFAULT_N, FourierLoop, GridLoop, ManifoldLoop, grid_times
from .manifold import EmbeddedManifold
from .smoothing import mollify_to_manifold

TOL_CHART = 1e-8


@dataclass(frozen=True, eq=False)
class PullbackSection:
    """Sampled section of alpha^*TM: ``vectors[i]`` is tangent at ``base[i]``."""

    manifold: EmbeddedManifold
    base: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        vec = np.array(self.vectors, dtype=float)
        if base.shape != vec.shape:
            raise GridMismatch(f"base {base.shape} and vectors {vec.shape} differ")
        self.manifold.check_tangent(base, vec)
        base.setflags(write=False)
        vec.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "vectors", vec)

    @property
    def n_samples(self) -> int:
        return self.base.shape[0]

    def with_vectors(self, vectors) -> "PullbackSection":
        return PullbackSection(self.manifold, self.base, vectors)

    def _check_same(self, other):
        if not isinstance(other, PullbackSection) or other.base.shape != self.base.shape \
                or np.max(np.abs(other.base - self.base)) > self.manifold.tol_tan:
            raise GridMismatch("sections live over different centres")

    def __add__(self, other):
        self._check_same(other)
        return self.with_vectors(self.vectors + other.vectors)

    def __sub__(self, other):
        self._check_same(other)
        return self.with_vectors(self.vectors - other.vectors)

    def __mul__(self, a):
        return self.with_vectors(float(a) * self.vectors)

    __rmul__ = __mul__

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.vectors, axis=1)))

    @classmethod
    def zero(cls, chart: "Chart") -> "PullbackSection":
        return cls(chart.manifold, chart.center_samples, np.zeros_like(chart.center_samples))


@dataclass(frozen=True, eq=False)
class Chart:
    """Psi_alpha for a smooth centre loop alpha, on an N-point grid."""

    center: ManifoldLoop
    n_samples: int = DEFAULT_N

    def __post_init__(self):
        if not self.center.smooth:
            raise NonSmoothCenter("charts are centred at smooth loops only")
        if self.center.n_samples is not None:
            object.__setattr__(self, "n_samples", self.center.n_samples)

    @property
    def manifold(self) -> EmbeddedManifold:
        return self.center.manifold

    @property
    def center_samples(self) -> np.ndarray:
        return self.center.samples(self.n_samples)

    def center_at(self, t) -> np.ndarray:
        """alpha(t) at arbitrary t; grid-backed centres are re-projected onto M."""
        t = np.asarray(t, dtype=float)
        x = self.center(t)
        if isinstance(self.center.loop, FourierLoop):
            return x
        return self.manifold.project(x)

    def _loop_samples(self, beta: ManifoldLoop) -> np.ndarray:
        if beta.manifold != self.manifold:
            raise GridMismatch("loop lives on a different manifold")
        return beta.samples(self.n_samples)


def chart_contains(chart: Chart, beta: ManifoldLoop) -> bool:
    pts = chart._loop_samples(beta)
    return bool(np.all(chart.manifold.contains_pair(chart.center_samples, pts)))


def chart_inverse(chart: Chart, beta: ManifoldLoop) -> PullbackSection:
    pts = chart._loop_samples(beta)
    M = chart.manifold
    alpha = chart.center_samples
    if not np.all(M.contains_pair(alpha, pts)):
        raise PairOutsideV("loop is not in the chart domain U_alpha")
    return PullbackSection(M, alpha, M._log(alpha, pts))


def chart_forward(chart: Chart, section: PullbackSection, interp: str = "linear") -> ManifoldLoop:
    M = chart.manifold
    alpha = chart.center_samples
    if section.base.shape != alpha.shape or np.max(np.abs(section.base - alpha)) > M.tol_tan:
        raise GridMismatch("section is not based along the chart centre")
    lengths = np.linalg.norm(section.vectors, axis=1)
    if np.any(lengths >= M.safety * M.r_inj):
        raise PairOutsideV("section leaves the domain of the local addition")
    return ManifoldLoop(GridLoop(M._exp(alpha, section.vectors), interp), M)


def find_chart_center(beta: ManifoldLoop, eps: float | None = None) -> Chart:
    """Chart centred at R_M(beta); contains beta by construction."""
    center = mollify_to_manifold(beta, eps)
    chart = Chart(center)
    if not chart_contains(chart, beta):
        raise PairOutsideV("mollified centre does not contain the loop")
    return chart


# --------------------------------------------------------------------------
# transitions

@dataclass(frozen=True, eq=False)
class TransitionData:
    first: Chart
    second: Chart

    def __post_init__(self):
        if self.first.manifold != self.second.manifold:
            raise ValueError("charts live on different manifolds")
        if self.first.n_samples != self.second.n_samples:
            raise GridMismatch("charts use different grids")

    @property
    def manifold(self) -> EmbeddedManifold:
        return self.first.manifold

    def reversed(self) -> "TransitionData":
        return TransitionData(self.second, self.first)

    def in_w12(self, t, v) -> np.ndarray:
        """(t, v) in W_12  iff  (alpha_2(t), eta_1(v)) in V."""
        M = self.manifold
        a1 = self.first.center_at(t)
        a2 = self.second.center_at(t)
        return M.contains_pair(a2, M._exp(a1, np.asarray(v, dtype=float)))


def transition_pointwise(T: TransitionData, t, v) -> np.ndarray:
    """theta_1(t, v) = (pi x eta)^{-1}(alpha_2(t), eta(v)), vectorized over t."""
    M = T.manifold
    a1 = T.first.center_at(t)
    a2 = T.second.center_at(t)
    v = M.check_tangent(a1, v)
    q = M._exp(a1, v)
    inside = M.contains_pair(a2, q)
    if not np.all(inside):
        raise OutsideW12(f"{int(np.size(inside) - np.sum(inside))} samples fall outside W_12")
    return M._log(a2, q)


def transition_apply(T: TransitionData, section: PullbackSection) -> PullbackSection:
    a1 = T.first.center_samples
    if section.base.shape != a1.shape or np.max(np.abs(section.base - a1)) > T.manifold.tol_tan:
        raise GridMismatch("section is not based along the first chart centre")
    M = T.manifold
    a2 = T.second.center_samples
    q = M._exp(a1, section.vectors)
    if not np.all(M.contains_pair(a2, q)):
        raise OutsideW12("section leaves W_12")
    return PullbackSection(M, a2, M._log(a2, q))


# --------------------------------------------------------------------------
# smoothness probes

@dataclass(frozen=True)
class ProbeReport:
    steps: tuple
    first: tuple          # central-difference first derivatives, one per step
    second: tuple
    first_diffs: tuple    # |D(h) - D(h/2)| in sup norm
    order: float          # observed convergence order of the first derivative
    richardson: np.ndarray
    second_norm: float

    @property
    def converged(self) -> bool:
        return self.order >= 2.0 - 0.2


def _flatten(x):
    if isinstance(x, PullbackSection):
        return x.vectors
    if isinstance(x, (GridLoop,)):
        return x.samples
    if isinstance(x, ManifoldLoop):
        return x.samples()
    return np.asarray(x, dtype=float)


def _shift(x, h, direction):
    if isinstance(x, PullbackSection):
        return x.with_vectors(x.vectors + h * _flatten(direction))
    return np.asarray(x, dtype=float) + h * _flatten(direction)


def smoothness_probe(fn: Callable, x0, direction, h0: float = 1e-2, levels: int = 3,
                     noise: float = 1e-11) -> ProbeReport:
    """Finite-difference derivatives of h -> fn(x0 + h * direction) at h = 0.

    Central differences at h0, h0/2, ..., Richardson extrapolation of the
    first derivative, and the observed order log2 of successive error
    ratios.  Differences below ``noise`` (relative) mean the map is affine
    along the segment to rounding; the order is then reported as inf.
    """
    try:
        f0 = _flatten(fn(x0))
        steps, d1, d2 = [], [], []
        for j in range(levels):
            h = h0 / 2 ** j
            fp = _flatten(fn(_shift(x0, h, direction)))
            fm = _flatten(fn(_shift(x0, -h, direction)))
            steps.append(h)
            d1.append((fp - fm) / (2 * h))
            d2.append((fp - 2 * f0 + fm) / h ** 2)
    except (PairOutsideV, OutsideW12) as exc:
        raise DomainExit(f"probe segment leaves the domain: {exc}") from None
    except LoopSpaceError:
        raise
    diffs = [float(np.max(np.abs(a - b))) for a, b in zip(d1, d1[1:])]
    scale = max(1.0, float(np.max(np.abs(d1[-1]))))
    if len(diffs) < 2 or diffs[-1] <= noise * scale:
        order = float("inf") if all(d <= noise * scale for d in diffs) else float("nan")
        if len(diffs) >= 2 and diffs[-1] <= noise * scale < diffs[0]:
            order = float("inf")
    else:
        order = float(np.log2(diffs[-2] / diffs[-1]))
    rich = (4 * d1[-1] - d1[-2]) / 3 if len(d1) > 1 else d1[-1]
    return ProbeReport(tuple(steps), tuple(d1), tuple(d2), tuple(diffs), order, rich,
                       float(np.max(np.abs(d2[-1]))))
