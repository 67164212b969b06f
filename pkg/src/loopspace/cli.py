"""Command-line experiment driver.

    loopspace run --config exp.json [--out report.json] [--csv table.csv]
    loopspace gen --kind triangle --seed 0 --count 3 --out corpus/
    loopspace mollify --epsilon 0.05 --loops corpus/*.json
    loopspace actions --space c0 --delta 0.3 --corpus corpus/

Every suite returns a list of checks {check, anchor, residual, tolerance,
pass}; a check passes iff residual <= tolerance.  The process exits 0 when
all checks pass, 1 when any fails and 2 on a bad configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import actions, atlas, corpus, smoothing, tubular
from .errors import CheckFailure, ConfigError, LoopSpaceError
from .loops import (
    DEFAULT_N,
    FourierLoop,
    GridLoop,
    ManifoldLoop,
    dumps_loop,
    grid_times,
    loads_loop,
)
from .manifold import FlatTorus2, manifold_from_spec

SUITES = ("charts", "transition", "mollify", "homotopy", "actions", "fibration")
DEFAULT_TOLERANCES = {
    "chart": 1e-8,
    "transition": 1e-8,
    "homotopy": 1e-9,
    "kernel": 1e-10,
    "flow": 1e-6,
    "witness": 1e-12,
    "invariance": 1e-10,
}


@dataclass
class ExperimentConfig:
    manifold: str = "sphere2"
    suites: list = field(default_factory=lambda: ["mollify"])
    seed: int = 0
    epsilon: float = 0.05
    grid: int = DEFAULT_N
    quadrature: int | None = None
    safety: float = 0.9
    loops: list = field(default_factory=list)
    generators: list = field(default_factory=list)
    space: str = "c0"
    delta: float = 0.3
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if not self.suites:
            raise ConfigError("select at least one suite")
        bad = [s for s in self.suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suites {bad}; choose from {SUITES}")
        if self.space not in actions.SPACES:
            raise ConfigError(f"unknown space {self.space!r}")
        if not (self.epsilon > 0 and self.delta > 0 and 0 < self.safety < 1):
            raise ConfigError("epsilon and delta must be positive, safety in (0, 1)")
        if self.grid < 8:
            raise ConfigError("grid must have at least 8 samples")
        if self.quadrature is not None and (self.quadrature % self.grid or self.quadrature < 4 * self.grid):
            raise ConfigError("quadrature must be a multiple of the grid, at least 4N")
        try:
            manifold_from_spec(self.manifold, self.safety)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for g in self.generators:
            if not isinstance(g, dict) or g.get("kind") not in corpus.KINDS:
                raise ConfigError(f"bad generator entry {g!r}")

    def tolerance(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def echo(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


# --------------------------------------------------------------------------
# loop sources

def load_loop_file(path) -> object:
    try:
        return loads_loop(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read loop file {path}: {exc}") from None


def _generated(cfg: ExperimentConfig, rng) -> list:
    M = manifold_from_spec(cfg.manifold, cfg.safety)
    out = []
    for g in cfg.generators:
        for _ in range(int(g.get("count", 1))):
            out.append(corpus.generate(g["kind"], rng, M, cfg.grid))
    return out


def _sources(cfg: ExperimentConfig, rng) -> list:
    return [load_loop_file(p) for p in cfg.loops] + _generated(cfg, rng)


def _manifold_loops(cfg: ExperimentConfig, loops, rng, count: int = 4) -> list:
    """Loops on M at the configured grid; defaults to noisy closed geodesics."""
    M = manifold_from_spec(cfg.manifold, cfg.safety)
    out = []
    for g in loops:
        try:
            ml = ManifoldLoop(g, M)
        except LoopSpaceError:
            continue
        if isinstance(g, FourierLoop):
            ml = ManifoldLoop(GridLoop(g(grid_times(cfg.grid)), "linear"), M)
        out.append(ml)
    if out:
        return out
    for _ in range(count):
        if M.compact:
            base = corpus.great_circle(M, rng).loop(grid_times(cfg.grid))
        else:
            # small amplitude keeps the default loops resolvable at eps on the grid
            base = 0.1 * corpus.fourier_random(rng, 4, M.ambient)(grid_times(cfg.grid))
        noise = 0.02 if M.compact else 0.05 * cfg.epsilon
        noisy = base + noise * rng.normal(size=base.shape)
        out.append(ManifoldLoop(GridLoop(M.project(noisy) if M.compact else noisy, "linear"), M))
    return out


# --------------------------------------------------------------------------
# checks

def check(name: str, anchor: str, residual: float, tolerance: float) -> dict:
    residual = float(residual)
    return {"check": name, "anchor": anchor, "residual": residual,
            "tolerance": float(tolerance), "pass": bool(residual <= tolerance)}


def suite_mollify(cfg, loops, rng) -> list:
    flat = [g.loop if isinstance(g, ManifoldLoop) else g for g in loops] or \
        [corpus.triangle(cfg.grid)] + [corpus.lipschitz_random(rng, cfg.grid) for _ in range(4)]
    out = []
    for i, g in enumerate(flat):
        grid = g if isinstance(g, GridLoop) else GridLoop(g(grid_times(cfg.grid)), "linear")
        m = smoothing.mollifier(grid, cfg.epsilon, cfg.quadrature)
        smooth = m.samples()
        fine, _ = smoothing._fine_samples(grid, m.quadrature)
        gap = float(np.max(np.linalg.norm(fine - smooth, axis=1)))
        out.append(check(f"mollify.closeness[{i}]", "sup|gamma - R(gamma)| < eps", gap, cfg.epsilon))
        out.append(check(f"mollify.kernel_mass[{i}]", "integral of phi_r = 1",
                         abs(smoothing.kernel_mass(m.radius) - 1.0), cfg.tolerance("kernel")))
        t = grid_times(16)
        out.append(check(f"mollify.periodicity[{i}]", "R(gamma)(t + 1) = R(gamma)(t)",
                         float(np.max(np.abs(m.at(t + 1.0) - m.at(t)))), 0.0))
    return out


def suite_homotopy(cfg, loops, rng) -> list:
    out = []
    for i, g in enumerate(_manifold_loops(cfg, loops, rng)):
        M = g.manifold
        eps = None if M.compact else cfg.epsilon
        center = smoothing.mollify_to_manifold(g, eps, cfg.quadrature)
        tol = cfg.tolerance("homotopy")
        h1 = smoothing.homotopy_eval(g, 1.0, center)
        h0 = smoothing.homotopy_eval(g, 0.0, center)
        out.append(check(f"homotopy.end1[{i}]", "H(gamma, 1) = gamma",
                         np.max(np.abs(h1.samples() - g.samples())), tol))
        out.append(check(f"homotopy.end0[{i}]", "H(gamma, 0) = R_M(gamma)",
                         np.max(np.abs(h0.samples() - center.samples())), tol))
        worst = 0.0
        for s in np.linspace(0.0, 1.0, 11):
            hs = smoothing.homotopy_eval(g, s, center)
            worst = max(worst, float(np.max(M.distance_to(hs.samples()))))
        out.append(check(f"homotopy.on_manifold[{i}]", "H(gamma, s) in M", worst, tol))
    return out


def suite_charts(cfg, loops, rng) -> list:
    out = []
    tol = cfg.tolerance("chart")
    for i, g in enumerate(_manifold_loops(cfg, loops, rng)):
        chart = atlas.find_chart_center(g, None if g.manifold.compact else cfg.epsilon)
        sec = atlas.chart_inverse(chart, g)
        back = atlas.chart_forward(chart, sec)
        out.append(check(f"charts.roundtrip[{i}]", "Psi_alpha(Psi_alpha^-1(beta)) = beta",
                         np.max(np.abs(back.samples() - g.samples())), tol))
        zero = atlas.chart_forward(chart, atlas.PullbackSection.zero(chart))
        out.append(check(f"charts.zero_section[{i}]", "Psi_alpha(0) = alpha",
                         np.max(np.abs(zero.samples() - chart.center_samples)), 1e-12))
    return out


def _second_chart(cfg, g, first):
    # a second smooth centre near the first: mollify at half the scale
    M = g.manifold
    eps = smoothing.manifold_constants(M).eps_M / 2 if M.compact else cfg.epsilon / 2
    return atlas.Chart(smoothing.mollify_to_manifold(g, eps, cfg.quadrature))


def suite_transition(cfg, loops, rng) -> list:
    out = []
    tol = cfg.tolerance("transition")
    for i, g in enumerate(_manifold_loops(cfg, loops, rng)[:2]):
        c1 = atlas.find_chart_center(g, None if g.manifold.compact else cfg.epsilon)
        c2 = _second_chart(cfg, g, c1)
        T = atlas.TransitionData(c1, c2)
        M = g.manifold
        sec = atlas.chart_inverse(c1, g)
        idx = rng.integers(0, c1.n_samples, size=1000)
        t = grid_times(c1.n_samples)[idx]
        v = sec.vectors[idx] + 0.05 * M.tangent_project(c1.center_samples[idx],
                                                          rng.normal(size=(1000, M.ambient)))
        w = atlas.transition_pointwise(T, t, v)
        back = atlas.transition_pointwise(T.reversed(), t, w)
        out.append(check(f"transition.inverse[{i}]", "phi_21(phi_12(t, v)) = (t, v)",
                         np.max(np.abs(back - v)), tol))
        applied = atlas.transition_apply(T, sec)
        composite = atlas.chart_inverse(c2, atlas.chart_forward(c1, sec))
        out.append(check(f"transition.coherence[{i}]", "phi_12 = Psi_2^-1 o Psi_1",
                         np.max(np.abs(applied.vectors - composite.vectors)), tol))
        direction = sec.with_vectors(M.tangent_project(sec.base, rng.normal(size=sec.vectors.shape)))
        probe = atlas.smoothness_probe(lambda s: atlas.transition_apply(T, s), sec, direction,
                                       h0=1e-2, levels=3)
        out.append(check(f"transition.smoothness[{i}]", "finite differences converge at order >= 2",
                         max(0.0, 1.8 - probe.order), 0.0))
    return out


def suite_fibration(cfg, loops, rng) -> list:
    M = manifold_from_spec(cfg.manifold, cfg.safety)
    mloops = _manifold_loops(cfg, loops, rng)
    out = []
    tol = cfg.tolerance("flow")
    for i, g in enumerate(mloops):
        a0 = g.samples()[0]
        if isinstance(M, FlatTorus2):
            _, b = M.angles(a0)
            tube = tubular.TorusCircleTube(M, float(b) + 0.3)
        elif M.compact:
            step = M.tangent_project(a0, rng.normal(size=M.ambient))
            tube = tubular.PointTube(M, M.exp(a0, 0.5 * step / np.linalg.norm(step)))
        else:
            tube = tubular.PointTube(M, a0 + 0.5)
        beta, nv = tubular.based_trivialize(g, tube)
        back = tubular.based_untrivialize(beta, nv, tube)
        out.append(check(f"fibration.roundtrip[{i}]", "Psi_v^-1(Psi_v(alpha)) = alpha",
                         np.max(np.abs(back.samples() - g.samples())), tol))
        flow = tubular.vertical_flow(tube, nv.base, nv.vector)
        out.append(check(f"fibration.flow_to_zero[{i}]", "Psi_v(v) = 0_v",
                         np.max(np.abs(flow.apply_fiber(nv.base[None], nv.vector[None]))), tol))
        out.append(check(f"fibration.section[{i}]", "s(v)(pi(v)) = v",
                         np.max(np.abs(flow.field(nv.base) - nv.vector)), 1e-10))
        e0 = tubular.evaluate_at_zero(back)
        out.append(check(f"fibration.e0[{i}]", "e_0(Psi^-1(beta, v)) = phi^-1(v)",
                         np.max(np.abs(e0 - tube.from_normal(nv.base[None], nv.vector[None])[0])), tol))
    return out


def suite_actions(cfg, loops, rng, report: dict | None = None) -> list:
    flat = [g.loop if isinstance(g, ManifoldLoop) else g for g in loops]
    if cfg.space == "smooth":
        flat = [g for g in flat if isinstance(g, FourierLoop)] or \
            [corpus.fourier_random(rng) for _ in range(4)]
    else:
        flat = flat or [corpus.lipschitz_random(rng, cfg.grid) for _ in range(4)] + [corpus.triangle(cfg.grid)]
    rep = actions.continuity_report(cfg.space, flat, cfg.delta, cfg.seed, cfg.grid)
    if report is not None:
        report["continuity"] = rep.to_dict()
    out = []
    for e in rep.entries:
        if e.status == "refuted":
            out.append(check(f"actions.level_{e.level}.witness", "||I - R_h|| >= 2",
                             e.residual, cfg.tolerance("witness")))
        else:
            out.append(check(f"actions.level_{e.level}", e.statement,
                             e.residual, cfg.tolerance("invariance")))
    return out


RUNNERS = {
    "charts": suite_charts,
    "transition": suite_transition,
    "mollify": suite_mollify,
    "homotopy": suite_homotopy,
    "fibration": suite_fibration,
}


def run(cfg: ExperimentConfig) -> dict:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    loops = _sources(cfg, rng)
    report: dict = {"seed": cfg.seed, "config": cfg.echo()}
    checks = []
    for name in cfg.suites:
        suite_rng = np.random.default_rng([cfg.seed, SUITES.index(name)])
        if name == "actions":
            checks += suite_actions(cfg, loops, suite_rng, report)
        else:
            checks += RUNNERS[name](cfg, loops, suite_rng)
    passed = sum(c["pass"] for c in checks)
    report["checks"] = checks
    report["summary"] = {"total": len(checks), "passed": passed, "failed": len(checks) - passed}
    return report


# --------------------------------------------------------------------------
# output

def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "anchor", "residual", "tolerance", "pass"])
    for c in report["checks"]:
        w.writerow([c["check"], c["anchor"], repr(c["residual"]), repr(c["tolerance"]), c["pass"]])
    return buf.getvalue()


def generate_corpus(kind: str, seed: int, count: int, out_dir, manifold: str = "sphere2",
                    n_samples: int = DEFAULT_N, degree: int = 6) -> list:
    if count < 1:
        raise ConfigError("count must be at least 1")
    if kind not in corpus.KINDS:
        raise ConfigError(f"unknown kind {kind!r}; choose from {corpus.KINDS}")
    rng = np.random.default_rng(seed)
    M = manifold_from_spec(manifold)
    paths = []
    for i in range(count):
        if kind == "fourier":
            loop = corpus.fourier_random(rng, degree)
        else:
            loop = corpus.generate(kind, rng, M, n_samples)
        path = Path(out_dir) / f"{kind}_{i:03d}.json"
        write_atomic(path, dumps_loop(loop) + "\n")
        paths.append(path)
    return paths


# --------------------------------------------------------------------------
# argument parsing

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loopspace", description="Numerical checks on loop spaces of manifolds.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--csv", help="also write a CSV residual table")

    r = sub.add_parser("run", help="run the suites of a JSON config")
    r.add_argument("--config", required=True)
    common(r)

    g = sub.add_parser("gen", help="write a seeded loop corpus")
    g.add_argument("--kind", required=True, choices=corpus.KINDS)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", required=True)
    g.add_argument("--manifold", default="sphere2")
    g.add_argument("--grid", type=int, default=DEFAULT_N)
    g.add_argument("--degree", type=int, default=6)

    for name in SUITES:
        s = sub.add_parser(name, help=f"run the {name} suite")
        s.add_argument("--manifold", default="sphere2")
        s.add_argument("--loops", nargs="*", default=[], help="loop files")
        s.add_argument("--corpus", help="directory of loop files")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--epsilon", type=float, default=0.05)
        s.add_argument("--grid", type=int, default=DEFAULT_N)
        s.add_argument("--quadrature", type=int)
        s.add_argument("--safety", type=float, default=0.9)
        s.add_argument("--space", choices=actions.SPACES, default="c0")
        s.add_argument("--delta", type=float, default=0.3)
        common(s)
    return p


def _config_from_args(args) -> ExperimentConfig:
    if args.command == "run":
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        return ExperimentConfig.from_dict(data)
    files = list(args.loops)
    if args.corpus:
        d = Path(args.corpus)
        if not d.is_dir():
            raise ConfigError(f"corpus directory {d} does not exist")
        files += sorted(str(p) for p in d.glob("*.json"))
    cfg = ExperimentConfig(manifold=args.manifold, suites=[args.command], seed=args.seed,
                           epsilon=args.epsilon, grid=args.grid, quadrature=args.quadrature,
                           safety=args.safety, loops=files, space=args.space, delta=args.delta)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "gen":
            paths = generate_corpus(args.kind, args.seed, args.count, args.out,
                                    args.manifold, args.grid, args.degree)
            for p in paths:
                print(p)
            return 0
        cfg = _config_from_args(args)
        report = run(cfg)
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
        if args.out:
            write_atomic(args.out, text)
        else:
            sys.stdout.write(text)
        if args.csv:
            write_atomic(args.csv, report_csv(report))
        if report["summary"]["failed"]:
            raise CheckFailure(f"{report['summary']['failed']} of {report['summary']['total']} checks failed")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CheckFailure, LoopSpaceError) as exc:
        print(f"check failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
