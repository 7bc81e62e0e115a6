"""Command line front end: gen | solve | bench | profile | verify.

Exit codes: 0 converged / success, 2 MaxIter, 3 StepFailed, 64 usage or
spec errors, 1 anything else.  MCM_OUT overrides --out when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench
from .errors import InstanceTooLarge, InvalidSpec, SingleSolver
from .manifold import feasibility_violation, kkt_residual_norm
from .problems import GEN_SIZE_CAP, gen_problem, instance_filename, read_instance, write_instance
from .solver import solve, solve_qr_baseline, write_trace_csv
from .verification import run_battery

EX_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage by default, which collides with the
    MaxIter exit code; route usage errors to 64 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _resolve_out(out: str | None) -> Path:
    env = os.environ.get("MCM_OUT")
    d = Path(env) if env else Path(out) if out else Path(".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _add_common_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=bench.SOLVER_NAMES, default="gpp")
    p.add_argument("--gamma-mode", choices=("practical", "theory"), default="practical")
    p.add_argument("--corrections", default="delta",
                   help="correction schedule: 'delta' or 'fixed:N'")
    p.add_argument("--max-iter", type=int, default=3000)


def _overrides_from_args(args, parser) -> bench.ConfigOverrides:
    ov = bench.ConfigOverrides(
        gamma_mode=args.gamma_mode, corrections=args.corrections, max_iter=args.max_iter
    )
    try:
        ov.schedule()
    except (InvalidSpec, ValueError):
        parser.error(f"--corrections must be 'delta' or 'fixed:N', got {args.corrections!r}")
    if args.max_iter < 1:
        parser.error("--max-iter must be >= 1")
    return ov


def cmd_gen(args, parser) -> int:
    spec = bench.load_experiment_spec(args.spec)
    out = _resolve_out(args.out)
    count = 0
    for family, params in bench.iter_instances(spec):
        if params.n > GEN_SIZE_CAP and not args.allow_large:
            raise InstanceTooLarge(
                f"n={params.n} exceeds the cap {GEN_SIZE_CAP}; rerun with --allow-large"
            )
        write_instance(out / instance_filename(family, params), family, params)
        count += 1
    print(f"wrote {count} instance files to {out}")
    return 0


def cmd_solve(args, parser) -> int:
    family, params = read_instance(Path(args.instance))
    model = gen_problem(family, params, allow_large=args.allow_large)
    cfg = bench.build_solver_config(model, family, args.solver, _overrides_from_args(args, parser))
    X0 = bench.initial_point(params.n, params.p, args.seed, params.seed)
    if args.solver == "qrbase":
        rep = solve_qr_baseline(model, X0, cfg)
    else:
        rep = solve(model, X0, cfg)
    out = _resolve_out(args.out)
    stem = instance_filename(family, params)[: -len(".json")] + f"_{args.solver}"
    write_trace_csv(out / f"{stem}.trace.csv", rep.trace)
    G = model.eval_grad(rep.final_X)
    summary = {
        "instance": instance_filename(family, params)[: -len(".json")],
        "solver": args.solver,
        "status": rep.status,
        "iters": rep.iters,
        "f_final": rep.f_final,
        "kkt": kkt_residual_norm(rep.final_X, G),
        "feasibility": feasibility_violation(rep.final_X),
        "gamma": rep.gamma,
        "rho": rep.rho,
        "c1_measured": rep.c1_measured,
        "master_seed": args.seed,
        "wall_s": rep.trace[-1].wall_seconds if rep.trace else 0.0,
    }
    (out / f"{stem}.summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    print(
        f"{summary['instance']} {args.solver} {rep.status} k={rep.iters} "
        f"f={rep.f_final:.12g} kkt={summary['kkt']:.3e}"
    )
    if rep.status == "MaxIter":
        return 2
    if rep.status == "StepFailed":
        return 3
    return 0


def cmd_bench(args, parser) -> int:
    spec = bench.load_experiment_spec(args.spec)
    if args.seed is not None:
        spec.master_seed = args.seed
    rows = bench.run_bench(spec, workers=args.workers, allow_large=args.allow_large)
    out = _resolve_out(args.out)
    path = out / "results.csv"
    bench.write_results_csv(path, rows)
    n_fail = sum(1 for r in rows if not r.status.startswith("Converged"))
    print(f"wrote {len(rows)} rows to {path} ({n_fail} non-converged)")
    return 0


def cmd_profile(args, parser) -> int:
    rows = bench.read_results_csv(Path(args.results))
    table = bench.profile_table(rows, omega_max=args.omega_max, grid_points=args.grid_points)
    out = _resolve_out(args.out)
    path = out / "profile.csv"
    bench.write_profile_csv(path, table)
    print(f"wrote profile over {len(table.instances)} instances x {len(table.solvers)} solvers to {path}")
    return 0


def cmd_verify(args, parser) -> int:
    checks = run_battery(quick=args.quick, inject_fault=args.inject_fault)
    failed = 0
    for c in checks:
        tag = "PASS" if c.passed else "FAIL"
        print(f"{tag} {c.name}: {c.detail}")
        failed += 0 if c.passed else 1
    if failed:
        print(f"{failed} of {len(checks)} checks failed", file=sys.stderr)
        return 1
    print(f"all {len(checks)} checks passed")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mcm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="write instance metadata files from an experiment spec")
    p_gen.add_argument("--spec", required=True)
    p_gen.add_argument("--out", default=None)
    p_gen.add_argument("--allow-large", action="store_true")
    p_gen.set_defaults(func=cmd_gen)

    p_solve = sub.add_parser("solve", help="run one solver on one instance")
    p_solve.add_argument("instance", help="instance metadata JSON from gen")
    _add_common_solver_flags(p_solve)
    p_solve.add_argument("--seed", type=int, default=0, help="master seed for the shared X0")
    p_solve.add_argument("--out", default=None)
    p_solve.add_argument("--allow-large", action="store_true")
    p_solve.set_defaults(func=cmd_solve)

    p_bench = sub.add_parser("bench", help="run the full instance x solver grid")
    p_bench.add_argument("--spec", required=True)
    p_bench.add_argument("--seed", type=int, default=None, help="override the spec master seed")
    p_bench.add_argument("--out", default=None)
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--allow-large", action="store_true")
    p_bench.set_defaults(func=cmd_bench)

    p_prof = sub.add_parser("profile", help="performance profile curves from results.csv")
    p_prof.add_argument("results", help="results.csv from bench")
    p_prof.add_argument("--omega-max", type=float, default=1e3)
    p_prof.add_argument("--grid-points", type=int, default=100)
    p_prof.add_argument("--out", default=None)
    p_prof.set_defaults(func=cmd_profile)

    p_ver = sub.add_parser("verify", help="run the oracle and inequality battery")
    p_ver.add_argument("--quick", action="store_true")
    p_ver.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except InvalidSpec as e:
        print(f"mcm: invalid spec: {e}", file=sys.stderr)
        return EX_USAGE
    except (InstanceTooLarge, SingleSolver) as e:
        print(f"mcm: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"mcm: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
