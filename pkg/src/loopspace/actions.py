"""The circle action on loop spaces.

(R_s gamma)(t) = gamma(t + s).  Fourier loops rotate exactly by a phase
c_k -> c_k e^{2 pi i k s}; grid loops rotate exactly by multiples of 1/N
and by interpolation otherwise.

The continuity report checks a ladder of continuity properties of the
action, from continuity of s -> R_s as a map into the operator norm
(level i) down to the norm being rotation invariant (level vii).  On
sup-norm spaces level (i) fails: cos(2 pi n t) is moved by R_{1/2n} to its
negative, so ||I - R_h|| >= 2 for arbitrarily small h.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyCorpus, MonotonicityViolation, ResolutionTooCoarse, ZeroProbe
from .loops import DEFAULT_N, FourierLoop, GridLoop, ManifoldLoop, fourier_fit, grid_times, seminorm, _fourier_sup

TOL_INVARIANCE = 1e-10
MIN_SLOPE = 0.05
MAX_DIFFEO_DEGREE = 8


# --------------------------------------------------------------------------
# rotations

def rotate(loop, s: float):
    """R_s gamma, t -> gamma(t + s)."""
    s = float(np.mod(s, 1.0))
    if isinstance(loop, ManifoldLoop):
        moved = rotate(loop.loop, s)
        M = loop.manifold
        if isinstance(moved, GridLoop) and not _is_grid_shift(s, loop.loop.n_samples):
            moved = moved.with_samples(M.project(moved.samples))
        return ManifoldLoop(moved, M, loop.smooth)
    if isinstance(loop, FourierLoop):
        return FourierLoop(loop.coeffs * np.exp(2j * np.pi * loop.wavenumbers * s))
    N = loop.n_samples
    if _is_grid_shift(s, N):
        j = int(round(s * N)) % N
        return loop.with_samples(np.roll(loop.samples, -j, axis=0))
    return loop.with_samples(loop(loop.times + s))


def _is_grid_shift(s: float, N: int) -> bool:
    x = s * N
    return abs(x - round(x)) < 1e-12 * max(1.0, N)


# --------------------------------------------------------------------------
# diffeomorphisms of the circle

@dataclass(frozen=True, eq=False)
class CircleDiffeo:
    """psi with lift t + d(t), d a trigonometric polynomial of degree <= 8."""

    displacement: FourierLoop
    min_slope: float = MIN_SLOPE

    def __post_init__(self):
        d = self.displacement
        if d.dim != 1:
            raise ValueError("displacement must be scalar")
        if d.degree > MAX_DIFFEO_DEGREE:
            raise ValueError(f"displacement degree {d.degree} exceeds {MAX_DIFFEO_DEGREE}")
        slope = 1.0 + d(grid_times(4096), order=1)[:, 0]
        if slope.min() < self.min_slope:
            raise MonotonicityViolation(f"min of psi' is {slope.min():.4f} < {self.min_slope}")

    @classmethod
    def rotation(cls, s: float) -> "CircleDiffeo":
        return cls(FourierLoop.constant([s]))

    @property
    def is_rotation(self) -> bool:
        return self.displacement.degree == 0 or np.all(np.abs(self.displacement.coeffs[0, self.displacement.wavenumbers != 0]) == 0)

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        return t + self.displacement(t)[..., 0]

    def inverse_lift(self, t):
        """Solve lift(x) = t by bisection on [t - D, t + D], then Newton."""
        t = np.asarray(t, dtype=float)
        D = float(np.max(np.abs(self.displacement(grid_times(4096))))) + 1e-3
        lo, hi = t - D, t + D
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.lift(mid) < t
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(2):
            x = x - (self.lift(x) - t) / (1.0 + self.displacement(x, order=1)[..., 0])
        return x


def precompose(loop, psi: CircleDiffeo, degree: int | None = None):
    """gamma o psi."""
    if psi.is_rotation:
        return rotate(loop, float(np.real(psi.displacement.coeffs[0, psi.displacement.degree])))
    if isinstance(loop, GridLoop):
        return loop.with_samples(loop(psi.lift(loop.times)))
    if degree is None:
        degree = 4 * (loop.degree + 1) * (psi.displacement.degree + 1) + 16
    G = 4 * degree + 4
    samples = GridLoop(loop(psi.lift(grid_times(G))), "linear")
    return fourier_fit(samples, degree)[0]


# --------------------------------------------------------------------------
# quantitative probes

def norm_invariance_residual(loop, s: float, order: int = 0) -> float:
    return abs(seminorm(rotate(loop, s), order) - seminorm(loop, order))


def _orbit_gap(loop, t: float, order: int) -> float:
    return seminorm(rotate(loop, t) - loop, order)


def orbit_modulus(loop, eps: float, order: int = 0, cap: float = 0.25) -> float:
    """Largest delta with ||R_t gamma - gamma||_n < eps for sampled |t| < delta."""
    if isinstance(loop, GridLoop):
        if order > 0:
            raise ValueError("grid loops carry only the sup norm")
        N = loop.n_samples
        lags = np.arange(1, int(cap * N) + 1)
        gaps = np.array([np.max(np.linalg.norm(np.roll(loop.samples, -j, axis=0) - loop.samples, axis=1))
                         for j in lags])
        bad = np.flatnonzero(gaps >= eps)
        m = lags[bad[0]] - 1 if bad.size else lags[-1]
        if m < 1:
            raise ResolutionTooCoarse(f"no shift of 1/{N} keeps the orbit within {eps}")
        return min(cap, (m + 1) / N) if bad.size else cap
    # Fourier: scan then bisect the first crossing
    # t-Lipschitz constant of the orbit in the C^order norm
    lip = max(_fourier_sup(loop, j) for j in range(1, order + 2))
    if lip == 0.0:
        return cap
    T = min(cap, 4.0 * eps / lip)
    ts = T * np.arange(1, 257) / 256
    gaps = _dense_orbit_gaps(loop, ts, order)
    bad = np.flatnonzero(gaps >= eps)
    if not bad.size:
        return T if T < cap else cap
    hi = ts[bad[0]]
    lo = ts[bad[0] - 1] if bad[0] > 0 else 0.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if _orbit_gap(loop, mid, order) < eps:
            lo = mid
        else:
            hi = mid
    return float(lo)


def _dense_orbit_gaps(loop: FourierLoop, ts, order: int) -> np.ndarray:
    """Grid estimate of ||R_t gamma - gamma||_n for many t at once (scan only)."""
    k = loop.wavenumbers
    G = max(256, 16 * (loop.degree + 1))
    phase = np.exp(2j * np.pi * np.outer(grid_times(G), k))
    shift = np.exp(2j * np.pi * np.outer(ts, k)) - 1.0
    out = np.zeros(len(ts))
    for j in range(order + 1):
        c = loop.coeffs * (2j * np.pi * k) ** j
        vals = np.real(np.einsum("gk,tk,dk->tgd", phase, shift, c))
        out = np.maximum(out, np.max(np.linalg.norm(vals, axis=2), axis=1))
    return out


@dataclass(frozen=True)
class Witness:
    n: int
    h: float
    loop: FourierLoop
    ratio: float
    lower_bound: float = 2.0


def discontinuity_witness(delta: float) -> Witness:
    """gamma = cos(2 pi n t), 1/n < delta, h = 1/(2n): (I - R_h) gamma = 2 gamma."""
    if not 0 < delta:
        raise ValueError("delta must be positive")
    n = int(np.floor(1.0 / delta)) + 1
    while 1.0 / n >= delta:
        n += 1
    while n > 1 and 1.0 / (n - 1) < delta:
        n -= 1
    h = 1.0 / (2 * n)
    gamma = FourierLoop.from_trig(cos={n: [1.0]})
    ratio = seminorm(gamma - rotate(gamma, h), 0) / seminorm(gamma, 0)
    return Witness(n, h, gamma, ratio)


@dataclass(frozen=True)
class OperatorProbe:
    loops: tuple
    order: int = 0


def operator_norm_lower_bound(op: Callable, probe: OperatorProbe) -> float:
    best = None
    for g in probe.loops:
        size = seminorm(g, probe.order)
        if size == 0.0:
            continue
        r = seminorm(op(g), probe.order) / size
        best = r if best is None else max(best, r)
    if best is None:
        raise ZeroProbe("every probe loop has zero norm")
    return best


@dataclass(frozen=True)
class OrbitProbe:
    steps: tuple
    first_diffs: tuple
    orders: tuple
    convergent: bool
    derivative_norm: float
    second_derivative_norm: float


def orbit_smoothness_probe(loop, h0: float | None = None, levels: int = 4,
                           order: int = 0) -> OrbitProbe:
    """Difference quotients of t -> R_t gamma at t = 0 in the order-n norm.

    Grid loops use steps that are multiples of 1/N, so every shift is exact.
    The orbit counts as convergent when each refinement shrinks the change in
    the first difference quotient at an observed order of at least 1.8.
    """
    if isinstance(loop, GridLoop):
        N = loop.n_samples
        steps = [2 ** (levels - 1 - j) / N for j in range(levels)]
    else:
        if h0 is None:
            h0 = 0.25 / (loop.degree + 1)
        steps = [h0 / 2 ** j for j in range(levels)]
    d1, d2 = [], []
    for h in steps:
        fp, fm = rotate(loop, h), rotate(loop, -h)
        d1.append((fp - fm) * (1.0 / (2 * h)))
        d2.append((fp - 2.0 * loop + fm) * (1.0 / h ** 2))
    diffs = [seminorm(a - b, order) for a, b in zip(d1, d1[1:])]
    scale = max(1.0, seminorm(d1[-1], order))
    orders = []
    for a, b in zip(diffs, diffs[1:]):
        if b <= 1e-11 * scale:
            orders.append(float("inf"))
        else:
            orders.append(float(np.log2(a / b)) if a > 0 else 0.0)
    if all(d <= 1e-11 * scale for d in diffs):
        convergent = True
    else:
        convergent = all(o >= 1.8 for o in orders)
    return OrbitProbe(tuple(steps), tuple(diffs), tuple(orders), convergent,
                      seminorm(d1[-1], order), seminorm(d2[-1], order))


# --------------------------------------------------------------------------
# continuity report

LEVELS = {
    "i": "s -> R_s continuous into the operator norm",
    "ii": "action S^1 x L -> L jointly continuous",
    "iii": "action separately continuous",
    "iv": "rotations equicontinuous",
    "v": "0-basis of invariant neighbourhoods",
    "vi": "rotations are continuous linear maps",
    "vii": "topology is rotation invariant",
}
SPACES = ("c0", "lipschitz", "smooth")


@dataclass
class LevelEntry:
    level: str
    statement: str
    status: str           # verified-at-scale | refuted | not-testable
    residual: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"level": self.level, "statement": self.statement, "status": self.status,
                "residual": self.residual, "detail": self.detail}


@dataclass
class ContinuityReport:
    space: str
    delta: float
    entries: list
    notes: list

    def status(self, level: str) -> str:
        return next(e.status for e in self.entries if e.level == level)

    def to_dict(self) -> dict:
        return {"space": self.space, "delta": self.delta,
                "levels": [e.to_dict() for e in self.entries], "notes": self.notes}


def _prepare(space: str, corpus: Sequence, n_samples: int) -> list:
    if space not in SPACES:
        raise ValueError(f"unknown space {space!r}; choose from {SPACES}")
    loops = [g.loop if isinstance(g, ManifoldLoop) else g for g in corpus]
    if space == "smooth":
        if not all(isinstance(g, FourierLoop) for g in loops):
            raise ValueError("the smooth space takes Fourier loops only")
    else:
        loops = [g if isinstance(g, GridLoop) and g.n_samples == n_samples
                 else GridLoop(g(grid_times(n_samples)), "linear") for g in loops]
    loops = [g for g in loops if seminorm(g, 0) > 0]
    if not loops:
        raise EmptyCorpus("no nonzero loops to test")
    return loops


def continuity_report(space: str, corpus: Sequence, delta: float = 0.3, seed: int = 0,
                      n_samples: int = DEFAULT_N, max_order: int = 2) -> ContinuityReport:
    """Check levels (i)-(vii) for the circle action on ``corpus``.

    Sup-norm spaces (c0 and lipschitz, both with the sup norm) test order 0;
    the smooth space tests the C^k seminorms for k <= max_order.
    """
    loops = _prepare(space, corpus, n_samples)
    rng = np.random.default_rng(seed)
    grid = space != "smooth"
    orders = [0] if grid else list(range(max_order + 1))

    if grid:
        shifts = rng.integers(1, n_samples, size=8) / n_samples
    else:
        shifts = rng.uniform(0.0, 1.0, size=8)
    entries = []

    # (vii) invariant norms
    res7 = max(norm_invariance_residual(g, s, n) for g in loops for s in shifts for n in orders)
    entries.append(LevelEntry("vii", LEVELS["vii"],
                              "verified-at-scale" if res7 <= TOL_INVARIANCE else "refuted", res7))

    # (vi) linearity and the isometry bound ||R_s|| <= 1
    a, b = 0.7, -1.3
    lin = 0.0
    for g, f in zip(loops, loops[1:] + loops[:1]):
        for s in shifts:
            lin = max(lin, seminorm(rotate(a * g + b * f, s) - (a * rotate(g, s) + b * rotate(f, s)), orders[-1]))
    opn = max(operator_norm_lower_bound(lambda g, s=s: rotate(g, s), OperatorProbe(tuple(loops), n))
              for s in shifts for n in orders)
    res6 = max(lin, opn - 1.0)
    entries.append(LevelEntry("vi", LEVELS["vi"],
                              "verified-at-scale" if res6 <= TOL_INVARIANCE else "refuted", res6,
                              {"linearity": lin, "operator_norm": opn}))

    # (v) and (iv): the eps-balls U(n, eps) are invariant, hence one ball serves all rotations
    eps = 0.1
    worst = -np.inf
    for n in orders:
        for g in loops:
            inner = g * (0.999 * eps / seminorm(g, n))
            for s in shifts:
                worst = max(worst, seminorm(rotate(inner, s), n) - eps)
    status = "verified-at-scale" if worst < 0 else "refuted"
    entries.append(LevelEntry("v", LEVELS["v"], status, max(worst, 0.0), {"eps": eps}))
    entries.append(LevelEntry("iv", LEVELS["iv"], status, max(worst, 0.0), {"eps": eps}))

    # (iii) orbit maps are continuous: a certified modulus for each loop
    moduli, res3 = [], -np.inf
    for g in loops:
        for n in orders:
            e = eps * max(1.0, seminorm(g, n))
            d = orbit_modulus(g, e, n)
            moduli.append(d)
            ts = _sample_shifts(rng, d, grid, n_samples)
            res3 = max(res3, max(_orbit_gap(g, t, n) - e for t in ts))
    entries.append(LevelEntry("iii", LEVELS["iii"],
                              "verified-at-scale" if res3 < 0 else "refuted", max(res3, 0.0),
                              {"min_delta": min(moduli)}))

    # (ii) joint continuity: ||R_t(gamma + beta) - gamma|| < eps for small t and beta
    res2 = -np.inf
    for g, f in zip(loops, loops[1:] + loops[:1]):
        for n in orders:
            e = eps * max(1.0, seminorm(g, n))
            d = orbit_modulus(g, e / 2, n)
            beta = f * (0.49 * e / seminorm(f, n))
            for t in _sample_shifts(rng, d, grid, n_samples):
                res2 = max(res2, seminorm(rotate(g + beta, t) - g, n) - e)
    entries.append(LevelEntry("ii", LEVELS["ii"],
                              "verified-at-scale" if res2 < 0 else "refuted", max(res2, 0.0)))

    # (i) operator-norm continuity
    notes = []
    if grid:
        w = discontinuity_witness(delta)
        entries.append(LevelEntry("i", LEVELS["i"], "refuted", abs(w.ratio - w.lower_bound),
                                  {"n": w.n, "h": w.h, "witness": f"cos(2 pi {w.n} t)",
                                   "ratio": w.ratio, "lower_bound": w.lower_bound}))
    else:
        # sup over the bounded set {||gamma||_{n+1} <= 1} of ||(R_t - I) gamma||_n is <= |t|
        res1, table = 0.0, []
        for n in orders:
            unit = [g * (1.0 / seminorm(g, n + 1)) for g in loops]
            for j in range(1, 11):
                t = 2.0 ** -j
                sup = max(_orbit_gap(g, t, n) for g in unit)
                table.append((n, t, sup))
                res1 = max(res1, sup / t - 1.0)
        entries.append(LevelEntry("i", LEVELS["i"],
                                  "verified-at-scale" if res1 <= 1e-9 else "refuted", max(res1, 0.0),
                                  {"bounded_set": "||gamma||_{n+1} <= 1",
                                   "largest_gap": max(s for _, _, s in table)}))
        notes.append({"status": "not-testable",
                      "statement": "a smooth representation does not by itself make the action continuous"})
    order_key = {k: i for i, k in enumerate(LEVELS)}
    entries.sort(key=lambda e: order_key[e.level])
    return ContinuityReport(space, delta, entries, notes)


def _sample_shifts(rng, d: float, grid: bool, n_samples: int) -> np.ndarray:
    if grid:
        m = int(np.ceil(d * n_samples)) - 1
        js = np.arange(-m, m + 1)
        return js[js != 0] / n_samples
    return np.concatenate([rng.uniform(-d, d, size=16), [0.999 * d, -0.999 * d]])
