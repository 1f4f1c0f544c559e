"""Command line driver: ``morpho <subcommand> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .control import optimize_control
from .growth import InvariantViolation, StepFailure, run_morpho
from .io import emit_control_csv, emit_csv, emit_state_vtk
from .nutrient import NutrientSolveError, run_coupled
from .optim import LineSearchFailure, MaxIterationsError
from .selftest import format_results, run_selftest
from .study import convergence_study, write_report

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_INVARIANT = 4

log = logging.getLogger("morphoelastic")


def _load_config(args, mode):
    if args.config:
        cfg = cfgmod.parse_config(args.config, mode=None)
    else:
        cfg = cfgmod.RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    cfgmod.validate(cfg, mode)
    return cfg


def _outdir(args, cfg) -> Path:
    out = Path(args.out or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfgmod.dump(cfg))
    return out


def _write_trajectory(traj, out: Path) -> None:
    emit_csv(traj, out / "trajectory.csv")
    emit_state_vtk(traj, 0, out / "state_initial.vtk")
    emit_state_vtk(traj, traj.n_steps, out / "state_final.vtk")


def cmd_simulate(args) -> int:
    cfg = _load_config(args, "simulate")
    out = _outdir(args, cfg)
    traj = run_morpho(cfgmod.build_problem(cfg))
    _write_trajectory(traj, out)
    print(f"simulate: {traj.n_steps} steps, final min det G = {float(np.min(traj.detG[-1])):.6g}; wrote {out}")
    return EXIT_OK


def cmd_simulate_coupled(args) -> int:
    cfg = _load_config(args, "simulate-coupled")
    out = _outdir(args, cfg)
    traj = run_coupled(cfgmod.build_coupled(cfg))
    _write_trajectory(traj, out)
    mu = traj.mu[-1]
    print(f"simulate-coupled: {traj.n_steps} steps, final nutrient in [{mu.min():.6g}, {mu.max():.6g}]; wrote {out}")
    return EXIT_OK


def cmd_control(args) -> int:
    cfg = _load_config(args, "control")
    out = _outdir(args, cfg)
    family, obj = cfgmod.build_control(cfg)
    c = cfg.control
    res = optimize_control(family, obj, cfgmod.build_problem(cfg), method=c.method, points=c.points,
                           budget=c.budget, growth_uses=c.order, threads=args.threads)
    emit_control_csv(res, out / "control.csv", names=c.basis)
    emit_csv(res.trajectory, out / "best_trajectory.csv")
    emit_state_vtk(res.trajectory, res.trajectory.n_steps, out / "best_final.vtk")
    flag = " (budget exhausted)" if res.budget_exhausted else ""
    print(f"control: {len(res.evaluated)} candidates, best c = {list(map(float, res.c))}, J = {res.J!r}{flag}")
    return EXIT_OK


def cmd_convergence_study(args) -> int:
    cfg = _load_config(args, "convergence-study")
    out = _outdir(args, cfg)
    report = convergence_study(lambda N: cfgmod.build_problem(cfg, N=N), cfg.time.N, cfg.output.levels)
    write_report(report, out / "convergence.json")
    print(json.dumps({k: report[k] for k in ("N", "errors", "ratios", "strictly_decreasing")}))
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest(args.seed or 0)
    print(format_results(results))
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_INVARIANT


COMMANDS = {
    "simulate": cmd_simulate,
    "simulate-coupled": cmd_simulate_coupled,
    "control": cmd_control,
    "convergence-study": cmd_convergence_study,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morpho", description="Time-discrete morphoelastic growth simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", help="key = value configuration file")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")
        p.add_argument("--seed", type=int, default=None, metavar="U64", help="seed for sampled checks")
        p.add_argument("--threads", type=int, default=1, metavar="N", help="concurrent control candidates")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return COMMANDS[args.command](args)
    except cfgmod.ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}\n{json.dumps(exc.dump, default=str)}", file=sys.stderr)
        return EXIT_INVARIANT
    except (StepFailure, NutrientSolveError, LineSearchFailure, MaxIterationsError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
