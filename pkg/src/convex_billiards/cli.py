"""``billiard`` command-line front end.

Subcommands
-----------
orbit         bounce sequence from ``(s0, theta0)`` as CSV
analyze       4-loop sweep, deviation statistics, ellipse candidate
aubry         minimal action curves, alpha(c) samples, foliation probe
interp-check  randomized check of the interpolation inequality

Exit codes follow ``BilliardError.exit_code``; 0 means the analysis ran,
whatever its verdicts.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import aubry_mather as am
from . import integrability as ig
from . import io
from .billiard import arc_point, iterate
from .errors import BilliardError, GrazingState, InvalidInput, NotConverged
from .geometry import SupportFunction, psi_of_s
from .orbits import loop_angle_table, theorem41_report


@dataclass
class RunConfig:
    domain: SupportFunction | None
    N: int
    out: Path
    seed: int
    tol: dict = field(default_factory=lambda: {"foliation": 1e-8, "alpha": 1e-5})

    def __post_init__(self):
        if self.N < 16 or self.N & (self.N - 1):
            raise InvalidInput(f"--grid must be a power of two >= 16, got {self.N}")
        if any(v <= 0 for v in self.tol.values()):
            raise InvalidInput("tolerances must be positive")
        self.out.mkdir(parents=True, exist_ok=True)


def _threads() -> None:
    n = os.environ.get("BILLIARD_THREADS")
    if not n:
        return
    import numba
    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def cmd_orbit(cfg: RunConfig, s0: float, theta0: float, n: int) -> Path:
    h = cfg.domain
    if not (0.0 < theta0 < np.pi):
        raise GrazingState("grazing state rejected: theta0 must lie in (0, pi)")
    psi0 = float(psi_of_s(h, s0 % h.perimeter))
    psi, th = iterate(h, arc_point(h, psi0, theta0), n - 1)
    return io.write_orbit(cfg.out / "orbit.csv", h, psi, th)


def cmd_analyze(cfg: RunConfig) -> Path:
    h = cfg.domain
    table = loop_angle_table(h, cfg.N)
    rep = theorem41_report(table, h)
    io.write_loop_table(cfg.out, table, rep.as_dict())
    U, U_int = ig.compute_U(h, table)
    red = ig.reduction_check(h, table)
    mu = ig.FourierSpectrum.from_samples(table.mu)
    trunc = ig.mu_truncation_residual(mu)
    io.write_csv(cfg.out / "criterion.csv", ["psi", "U", "mu", "d"],
                 [table.psis, U, table.mu, table.d])
    report = {"grid": cfg.N, "loop_table": rep.as_dict(), "U_integral": U_int,
              "reduction": red, "mu_norms": mu.norms, "mu_truncation": trunc,
              "hypotheses": {"foliation": "not checked here; run `billiard aubry --probe 4`"}}
    try:
        cand = ig.candidate_ellipse(mu, table.R0)
        report["candidate"] = {"a": cand.params.a, "b": cand.params.b,
                               "rotation": cand.rotation, "amplitude": cand.amplitude}
        graph = ig.elliptic_graph_distance(h, cand, N=cfg.N)
        io.write_csv(cfg.out / "elliptic_graph.csv", ["theta", "lambda"], [graph.theta, graph.lam])
        report["elliptic_graph"] = {"lambda0": graph.lambda0, "e0": graph.e0,
                                    "c0_distance": graph.c0_distance,
                                    "c1_distance": graph.c1_distance}
    except BilliardError as exc:
        report["candidate_error"] = {"type": type(exc).__name__, "message": str(exc)}
    return io.write_report(cfg.out / "report.json", report, "integrability")


def cmd_aubry(cfg: RunConfig, p: int | None, q: int | None, c_range: list | None,
              probe: int | None, dp_grid: int) -> list:
    h = cfg.domain
    written = []
    if q is not None:
        curve = am.minimal_action_curve(h, p or 1, q, N=cfg.N, dp_grid=dp_grid)
        written.append(io.write_csv(cfg.out / f"M_{curve.p}_{curve.q}.csv", ["x", "M"],
                                    [curve.x, curve.values]))
        written.append(io.write_report(cfg.out / f"M_{curve.p}_{curve.q}.json",
                                       {"p": curve.p, "q": curve.q, "N": cfg.N,
                                        "spread": curve.spread, "min": curve.values.min(),
                                        "max": curve.values.max()}, "minimal-action"))
    if c_range is not None:
        c0, c1, n = float(c_range[0]), float(c_range[1]), int(c_range[2])
        rows = []
        for c in np.linspace(c0, c1, n):
            g = am.iterate_action(am.build_action(h, c, cfg.N), 512)
            try:
                est, ok = am.alpha_estimate(g, cfg.tol["alpha"]), True
            except NotConverged as exc:
                est, ok = exc.result, False
            rows.append({"c": c, "alpha": est.alpha, "alpha_cycle_mean": est.alpha_karp,
                         "slope_spread": est.slope_spread, "converged": ok})
        written.append(io.write_report(cfg.out / "alpha.json", {"N": cfg.N, "samples": rows},
                                       "alpha"))
    if probe is not None:
        rep = am.foliation_probe(h, q0=probe, tol=cfg.tol["foliation"])
        written.append(io.write_report(cfg.out / "foliation.json", rep.as_dict(), "foliation"))
    if not written:
        raise InvalidInput("aubry needs --q, --c-range or --probe")
    return written


def cmd_interp_check(cfg: RunConfig, samples: int, l: int, C: float) -> Path:
    rng = np.random.default_rng(cfg.seed)
    results = [ig.interpolation_bound_check(ig.random_trig_polynomial(rng, l, bound=C), l, C)
               for _ in range(samples)]
    results += [ig.interpolation_bound_check(ig.mode_concentration(k, l, C), l, C)
                for k in (1, 2, 3, 4, 6, 8, 16, 32, 64)]
    fails = sum(not r.passed for r in results)
    worst = max(r.ratio / r.K_impl for r in results)
    return io.write_report(cfg.out / "interp_check.json",
                           {"seed": cfg.seed, "l": l, "C": C, "checked": len(results),
                            "failures": fails, "worst_ratio_over_constant": worst},
                           "interpolation-check")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="billiard", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", type=Path, help="domain spec (JSON)")
    common.add_argument("--grid", type=int, default=1024, help="grid size N (power of two)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    sub = ap.add_subparsers(dest="command", required=True)

    o = sub.add_parser("orbit", parents=[common], help="dump a bounce sequence")
    o.add_argument("--s0", type=float, default=0.0, help="starting arclength")
    o.add_argument("--theta0", type=float, required=True, help="angle to the tangent")
    o.add_argument("--n", type=int, default=100, help="number of rows")

    sub.add_parser("analyze", parents=[common], help="4-loop integrability analysis")

    a = sub.add_parser("aubry", parents=[common], help="minimal action diagnostics")
    a.add_argument("--p", type=int, default=1)
    a.add_argument("--q", type=int)
    a.add_argument("--c-range", nargs=3, metavar=("C0", "C1", "NC"))
    a.add_argument("--probe", type=int, metavar="Q0", help="run the foliation probe")
    a.add_argument("--dp-grid", type=int, default=256)

    i = sub.add_parser("interp-check", parents=[common], help="interpolation inequality check")
    i.add_argument("--samples", type=int, default=1000)
    i.add_argument("--l", type=int, default=6)
    i.add_argument("--C", type=float, default=1.0)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _threads()
    domain = io.load_domain(args.domain) if args.domain else None
    if domain is None and args.command != "interp-check":
        raise InvalidInput("--domain is required")
    cfg = RunConfig(domain, args.grid, args.out, args.seed)
    if args.command == "orbit":
        cmd_orbit(cfg, args.s0, args.theta0, args.n)
    elif args.command == "analyze":
        cmd_analyze(cfg)
    elif args.command == "aubry":
        cmd_aubry(cfg, args.p, args.q, args.c_range, args.probe, args.dp_grid)
    else:
        cmd_interp_check(cfg, args.samples, args.l, args.C)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except BilliardError as exc:
        msg = f"billiard: {type(exc).__name__}: {exc}"
        cause = getattr(exc, "cause", None)
        if cause is not None:
            msg += f" [cause: {type(cause).__name__}]"
        print(msg, file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
