"""Command-line front end.

Subcommands: solve (single solve + layer export), convergence (time-step
sweep report), compare (both solvers side by side), selftest (module
invariant suites).  Exit codes: 0 success, 1 runtime failure, 2 usage.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .config import build_problem, parse_config
from .errors import SolverError
from .harness import compare_schemes, emit_report, emit_solution_svg, \
    run_convergence
from .scheme import export_layers, solve


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitsolve",
        description="Splitting solver (Hopf-Lax + Feynman-Kac) for "
                    "semilinear parabolic equations with convex coercive "
                    "Hamiltonians.",
        epilog="In coefficient expressions '^' is right-associative "
               "exponentiation (not XOR) and a leading minus binds tighter "
               "than '^'. SPLITSOLVE_THREADS is the fallback for --threads.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help="worker pool cap for independent solves")
    parser.add_argument("--seed", type=int, default=None,
                        help="seed for randomized cross-checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="single solve and layer export")
    p_solve.add_argument("--config", required=True)
    p_solve.add_argument("--out", default=None,
                         help="output directory (default from config)")

    p_conv = sub.add_parser("convergence", help="time-step sweep report")
    p_conv.add_argument("--config", required=True)

    p_cmp = sub.add_parser("compare",
                           help="splitting vs Howard FD on the same grid")
    p_cmp.add_argument("--config", required=True)

    sub.add_parser("selftest", help="run module invariant suites")
    return parser


def _threads(args, cfg) -> int:
    if args.threads is not None:
        return max(args.threads, 1)
    env = os.environ.get("SPLITSOLVE_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise SolverError(f"SPLITSOLVE_THREADS={env!r} is not an integer")
    return cfg.threads


def _print_report(rep, out=print):
    out(f"solver={rep.solver} probe=(t={rep.probe[0]:g}, x={rep.probe[1]:g}) "
        f"reference={rep.reference} ({rep.reference_value:.6f})")
    out(f"{'delta':>10} {'value':>12} {'abs_error':>12} {'rel_error':>12} "
        f"{'seconds':>10}")
    for r in rep.rows:
        if r.status != "ok":
            out(f"{r.delta:>10.4g} {r.status}")
            continue
        out(f"{r.delta:>10.4g} {r.value:>12.6f} {r.abs_error:>12.3e} "
            f"{r.rel_error * 100:>11.4f}% {r.seconds:>10.3f}")
    if rep.fitted_rate == rep.fitted_rate:
        out(f"fitted log-log rate: {rep.fitted_rate:.3f}")


def _cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    prob = build_problem(cfg)
    out_dir = args.out or cfg.out_dir
    sol = solve(prob, cfg.grid(), cfg.operator_config())
    try:
        export_layers(sol, out_dir)
    except OSError as exc:
        raise SolverError(f"IoError: {exc}") from exc
    if "svg" in cfg.formats:
        emit_solution_svg(
            [(f"t={sol.time_of(sol.n_steps):g}", sol.xs,
              sol.layers[-1].vals)],
            os.path.join(out_dir, "solution.svg"))
    t0, x0 = cfg.probe()
    from .scheme import evaluate
    print(f"u({t0:g}, {x0:g}) = {evaluate(sol, t0, x0):.6f} "
          f"(delta={cfg.deltas[0]:g}); layers in {out_dir}")
    return 0


def _cmd_convergence(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    prob = build_problem(cfg)
    rep = run_convergence(prob, cfg.grid(), cfg.deltas, cfg.probe(),
                          solver="splitting", cfg=cfg.operator_config(),
                          threads=_threads(args, cfg))
    _print_report(rep)
    written = emit_report(rep, cfg.out_dir, tuple(cfg.formats))
    _emit_profiles(cfg, prob)
    print("wrote: " + ", ".join(written))
    return 0


def _cmd_compare(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    prob = build_problem(cfg)
    paired = compare_schemes(prob, cfg.grid(), cfg.deltas, cfg.probe(),
                             cfg=cfg.operator_config(),
                             howard_cfg=cfg.howard_config(prob),
                             threads=_threads(args, cfg))
    _print_report(paired.splitting)
    _print_report(paired.howard)
    for row_s, winner in zip(paired.splitting.rows, paired.smaller_error):
        print(f"delta={row_s.delta:g}: smaller error -> {winner}")
    written = emit_report(paired, cfg.out_dir, tuple(cfg.formats))
    print("wrote: " + ", ".join(written))
    return 0


def _emit_profiles(cfg, prob) -> None:
    """Value-vs-x chart of the t=0 layer for each swept delta."""
    if "svg" not in cfg.formats:
        return
    from dataclasses import replace
    curves = []
    for d in cfg.deltas:
        sol = solve(prob, cfg.grid(), replace(cfg.operator_config(), delta=d))
        layer = sol.layers[-1]
        curves.append((f"delta={d:g}", layer.xs, layer.vals))
    emit_solution_svg(curves, os.path.join(cfg.out_dir, "solution.svg"))


def _cmd_selftest(args) -> int:
    from .selftest import run_all
    return 0 if run_all(seed=args.seed or 0) else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"solve": _cmd_solve, "convergence": _cmd_convergence,
                "compare": _cmd_compare, "selftest": _cmd_selftest}
    try:
        return handlers[args.command](args)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
