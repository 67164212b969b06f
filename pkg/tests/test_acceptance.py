"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""
import time

import numpy as np
import pytest

from loopspace import atlas, smoothing, tubular
from loopspace.actions import discontinuity_witness, norm_invariance_residual, orbit_smoothness_probe
from loopspace.cli import ExperimentConfig, SUITES, run
from loopspace.corpus import fourier_random, great_circle, lipschitz_random, triangle
from loopspace.loops import GridLoop, ManifoldLoop, grid_times, seminorm
from loopspace.manifold import FlatTorus2, UnitSphere

import conftest

MANIFOLDS = {"sphere2": UnitSphere.sphere2, "flat-torus2": FlatTorus2.make}


def report(capsys, label, ok, **measured):
    detail = ", ".join(f"{k}={v:.3e}" if isinstance(v, float) else f"{k}={v}" for k, v in measured.items())
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {label}: {detail}")
    assert ok, detail


def noisy_loop(M, rng, n=256, noise=0.05):
    pts = great_circle(M, rng).loop(grid_times(n))
    return ManifoldLoop(GridLoop(M.project(pts + noise * rng.normal(size=pts.shape)), "linear"), M)


def test_criterion_1_local_addition(capsys):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    zero_res = roundtrip = 0.0
    for make in MANIFOLDS.values():
        M = make()
        u, v, q = conftest.in_v_pairs(M, rng, 1000)
        zero_res = max(zero_res, float(np.max(np.abs(M.exp(u, np.zeros_like(v)) - u))))
        roundtrip = max(roundtrip, float(np.max(np.abs(M.log(u, q) - v))),
                        float(np.max(np.abs(M.exp(u, M.log(u, q)) - q))))
    elapsed = time.perf_counter() - start
    report(capsys, "1 local addition", zero_res == 0.0 and roundtrip < 1e-9 and elapsed < 1.0,
           zero=zero_res, roundtrip=roundtrip, seconds=elapsed)


def test_criterion_2_charts(capsys):
    rng = np.random.default_rng(2)
    worst = zero = 0.0
    count = 0
    for make in MANIFOLDS.values():
        M = make()
        for _ in range(10):
            chart = atlas.Chart(great_circle(M, rng), 256)
            for _ in range(10):
                pts = chart.center_samples
                beta = ManifoldLoop(GridLoop(M.project(pts + 0.1 * rng.normal(size=pts.shape)), "linear"), M)
                sec = atlas.chart_inverse(chart, beta)
                worst = max(worst, float(np.max(np.abs(atlas.chart_forward(chart, sec).samples() - beta.samples()))))
                count += 1
            z = atlas.chart_forward(chart, atlas.PullbackSection.zero(chart))
            zero = max(zero, float(np.max(np.abs(z.samples() - chart.center_samples))))
    report(capsys, "2 charts", worst < 1e-8 and zero <= 1e-12, loops=count, roundtrip=worst, zero_section=zero)


def test_criterion_3_transitions(capsys):
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    inv = coh = 0.0
    order = np.inf
    for make in MANIFOLDS.values():
        M = make()
        g = noisy_loop(M, rng)
        c1 = atlas.find_chart_center(g)
        c2 = atlas.Chart(smoothing.mollify_to_manifold(g, smoothing.manifold_constants(M).eps_M / 2))
        T = atlas.TransitionData(c1, c2)
        sec = atlas.chart_inverse(c1, g)
        idx = rng.integers(0, c1.n_samples, size=1000)
        t = grid_times(c1.n_samples)[idx]
        v = sec.vectors[idx] + 0.05 * M.tangent_project(c1.center_samples[idx], rng.normal(size=(1000, M.ambient)))
        back = atlas.transition_pointwise(T.reversed(), t, atlas.transition_pointwise(T, t, v))
        inv = max(inv, float(np.max(np.abs(back - v))))
        applied = atlas.transition_apply(T, sec)
        composite = atlas.chart_inverse(c2, atlas.chart_forward(c1, sec))
        coh = max(coh, float(np.max(np.abs(applied.vectors - composite.vectors))))
        d = sec.with_vectors(M.tangent_project(sec.base, rng.normal(size=sec.vectors.shape)))
        probe = atlas.smoothness_probe(lambda s: atlas.transition_apply(T, s), sec, d)
        order = min(order, probe.order)
    elapsed = time.perf_counter() - start
    report(capsys, "3 transitions", inv < 1e-8 and coh < 1e-8 and order >= 1.8 and elapsed < 5.0,
           inverse=inv, coherence=coh, order=float(order), seconds=elapsed)


def test_criterion_4_mollifier(capsys):
    rng = np.random.default_rng(4)
    corpus = [triangle(1024)] + [lipschitz_random(rng, 1024) for _ in range(49)]
    gaps = {}
    for eps in (0.1, 0.01):
        worst = 0.0
        for g in corpus:
            m = smoothing.mollifier(g, eps)
            worst = max(worst, float(np.max(np.abs(m.samples() - g(grid_times(m.quadrature))))) / eps)
        gaps[eps] = worst
    mass = max(abs(smoothing.kernel_mass(r) - 1.0) for r in (1e-3, 1e-2, 0.1, 0.25))
    m = smoothing.mollifier(GridLoop(np.cos(2 * np.pi * grid_times(256))[:, None]), 0.05)
    h = 1e-4 * m.radius
    t = np.arange(1, 64) / 64.0
    fd = (-m.at(t + 2 * h) + 8 * m.at(t + h) - 8 * m.at(t - h) + m.at(t - 2 * h)) / (12 * h)
    deriv = float(np.max(np.abs(m.at(t, order=1) - fd)))
    period = float(np.max(np.abs(m.at(t + 1.0) - m.at(t))))
    ok = gaps[0.1] < 1 and gaps[0.01] < 1 and mass <= 1e-10 and deriv < 1e-6 and period == 0.0
    report(capsys, "4 mollifier", ok, gap_over_eps_0_1=gaps[0.1], gap_over_eps_0_01=gaps[0.01],
           kernel_mass=mass, derivative=deriv, periodicity=period)


def test_criterion_5_homotopy(capsys):
    rng = np.random.default_rng(5)
    ends = on_m = 0.0
    for make in MANIFOLDS.values():
        M = make()
        for g in (noisy_loop(M, rng), ManifoldLoop(great_circle(M, rng).loop, M)):
            center = smoothing.mollify_to_manifold(g)
            n = center.n_samples or 256
            samples = g.samples(n) if g.smooth else g.samples()
            ends = max(ends, float(np.max(np.abs(smoothing.homotopy_eval(g, 1.0, center).samples() - samples))),
                       float(np.max(np.abs(smoothing.homotopy_eval(g, 0.0, center).samples()
                                           - center.samples(len(samples))))))
            for s in np.linspace(0, 1, 11):
                on_m = max(on_m, float(np.max(M.distance_to(smoothing.homotopy_eval(g, s, center).samples()))))
    report(capsys, "5 homotopy", ends <= 1e-9 and on_m <= 1e-9, endpoints=ends, on_manifold=on_m)


def _tubes(rng):
    S = UnitSphere.sphere2()
    x0 = S.random_points(rng, 1)[0]
    T = FlatTorus2.make()
    yield S, tubular.PointTube(S, x0), x0
    yield T, tubular.TorusCircleTube(T, 0.4), T.from_angles(np.array(1.0), np.array(0.4))


def _unit_tangent(M, p, rng):
    w = M.tangent_project(p, rng.normal(size=M.ambient))
    return w / np.linalg.norm(w)


def loop_through(M, x, rng, n=256, noise=0.02):
    """Noisy closed geodesic starting exactly at x."""
    t = 2 * np.pi * grid_times(n)
    if isinstance(M, FlatTorus2):
        a, b = M.angles(x)
        pts = M.from_angles(a + t, b + 0.05 * np.sin(t))
    else:
        w = _unit_tangent(M, x, rng)
        pts = np.cos(t)[:, None] * x + np.sin(t)[:, None] * w
    pts = M.project(pts + noise * rng.normal(size=pts.shape))
    pts[0] = x
    return ManifoldLoop(GridLoop(pts, "linear"), M)


def test_criterion_6_based_loops(capsys):
    rng = np.random.default_rng(6)
    sec = flow = trip = e0 = 0.0
    for M, tube, p in _tubes(rng):
        for _ in range(5):
            g = loop_through(M, M.exp(p, 0.3 * _unit_tangent(M, p, rng)), rng)
            beta, nv = tubular.based_trivialize(g, tube)
            back = tubular.based_untrivialize(beta, nv, tube)
            f = tubular.vertical_flow(tube, nv.base, nv.vector)
            sec = max(sec, float(np.max(np.abs(f.field(nv.base) - nv.vector))))
            flow = max(flow, float(np.max(np.abs(f.apply_fiber(nv.base[None], nv.vector[None])))))
            trip = max(trip, float(np.max(np.abs(back.samples() - g.samples()))))
            # e0 of the based loop lies on P; e0 of the untrivialized loop is phi^-1(v)
            b0 = tubular.evaluate_at_zero(beta)
            e0 = max(e0, float(np.max(np.abs(b0 - tube.from_normal(nv.base[None], np.zeros((1, tube.rank)))[0]))),
                     float(np.max(np.abs(tubular.evaluate_at_zero(back)
                                         - tube.from_normal(nv.base[None], nv.vector[None])[0]))))
    ok = sec <= 1e-10 and flow <= 1e-6 and trip < 1e-6 and e0 < 1e-6
    report(capsys, "6 based loops", ok, section=sec, flow_to_zero=flow, roundtrip=trip, e0=e0)


def test_criterion_7_actions(capsys):
    rng = np.random.default_rng(7)
    inv = 0.0
    for _ in range(20):
        f = fourier_random(rng, 8)
        s = float(rng.uniform())
        for n in range(6):
            # relative to the seminorm, which reaches ~1e8 at n = 5
            inv = max(inv, norm_invariance_residual(f, s, n) / max(1.0, seminorm(f, n)))
    ratios = [discontinuity_witness(d) for d in (0.3, 0.05, 0.001)]
    witness = max(abs(w.ratio - 2.0) for w in ratios)
    smooth_ok = all(orbit_smoothness_probe(fourier_random(rng, 5)).convergent for _ in range(5))
    rough = orbit_smoothness_probe(triangle(256))
    rough_ok = (not rough.convergent) and len(rough.first_diffs) >= 3
    ok = inv <= 1e-10 and witness <= 1e-15 and all(w.h < d for w, d in zip(ratios, (0.3, 0.05, 0.001))) \
        and smooth_ok and rough_ok
    report(capsys, "7 actions", ok, invariance=inv, witness_gap=witness,
           witness_n=[w.n for w in ratios], smooth_convergent=smooth_ok, triangle_divergent=rough_ok)


def test_criterion_8_determinism_and_runtime(capsys):
    cfgs = [ExperimentConfig(manifold=m, suites=list(SUITES), seed=11) for m in MANIFOLDS]
    same = all(run(c) == run(c) for c in cfgs)
    passed = all(run(c)["summary"]["failed"] == 0 for c in cfgs)
    elapsed = time.perf_counter() - conftest.SESSION_START
    report(capsys, "8 determinism and runtime", same and passed and elapsed < 60.0,
           deterministic=same, suites_pass=passed, session_seconds=elapsed)
