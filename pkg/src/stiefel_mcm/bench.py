"""Benchmark engine: experiment specs, solver grids, measurements, profiles.

The CLI front end lives in cli.py; everything here is importable and pure
(no argv, no sys.exit) so the test suite can drive it directly.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidSpec, SingleSolver
from .manifold import feasibility_violation, kkt_residual_norm, orthonormalize_qr
from .problems import GenParams, gen_problem, instance_filename
from .rng import DeterministicRng, splitmix64_stream
from .solver import SolveConfig, default_solve_config, solve, solve_qr_baseline, write_trace_csv

# Machine precision constant used in the fval-variance measurement.
EPS_MACHINE = 2.2204e-16

# Performance ratio assigned to runs that did not converge.
FAIL_RATIO = 1e6

SOLVER_NAMES = ("grp", "gpp", "cbcdp", "qrbase")

_KIND_BY_SOLVER = {"grp": "GR", "gpp": "GP", "cbcdp": "CBCD"}

RESULTS_HEADER = (
    "instance,solver,status,iters,f,f_min,fval_variance,kkt_violation,feasibility,wall_s"
)


@dataclass
class ConfigOverrides:
    gamma_mode: str = "practical"
    corrections: str = "delta"  # "delta" or "fixed:N"
    max_iter: int = 3000

    def schedule(self) -> tuple[str, int]:
        if self.corrections == "delta":
            return "delta", 1
        if self.corrections.startswith("fixed:"):
            count = int(self.corrections.split(":", 1)[1])
            return "fixed", count
        raise InvalidSpec(f"config.corrections: expected 'delta' or 'fixed:N', got {self.corrections!r}")


@dataclass
class GridSpec:
    family: int
    n_values: list[int]
    p_values: list[int]
    seeds: list[int]
    eta: float | None = None
    zeta: float | None = None
    alpha: float | None = None
    beta: float | None = None


@dataclass
class ExperimentSpec:
    master_seed: int
    grids: list[GridSpec]
    solvers: list[str]
    config: ConfigOverrides = field(default_factory=ConfigOverrides)


def _need(obj: dict, key: str, path: str):
    if key not in obj:
        raise InvalidSpec(f"{path}.{key}: missing required field")
    return obj[key]


def _int_list(value, path: str) -> list[int]:
    if isinstance(value, int):
        value = [value]
    if not isinstance(value, list) or not value or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        raise InvalidSpec(f"{path}: expected a nonempty list of integers")
    return list(value)


_FAMILY_DEFAULTS = {
    1: {"eta": 1.01, "zeta": 1.01, "alpha": 1.0, "beta": 2.0},
    2: {"eta": 1.05, "zeta": 1.05, "alpha": 0.1, "beta": 2.0},
}


def parse_experiment_spec(doc: dict, path: str = "spec") -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise InvalidSpec(f"{path}: expected a JSON object")
    master_seed = doc.get("master_seed", 0)
    if not isinstance(master_seed, int) or isinstance(master_seed, bool) or master_seed < 0:
        raise InvalidSpec(f"{path}.master_seed: expected a nonnegative integer")
    raw_grids = _need(doc, "grids", path)
    if not isinstance(raw_grids, list) or not raw_grids:
        raise InvalidSpec(f"{path}.grids: expected a nonempty list")
    grids = []
    for gi, g in enumerate(raw_grids):
        gp = f"{path}.grids[{gi}]"
        if not isinstance(g, dict):
            raise InvalidSpec(f"{gp}: expected a JSON object")
        family = _need(g, "family", gp)
        if family not in (1, 2):
            raise InvalidSpec(f"{gp}.family: expected 1 or 2")
        n_values = _int_list(_need(g, "n", gp), f"{gp}.n")
        p_values = _int_list(_need(g, "p", gp), f"{gp}.p")
        if "seeds" in g and "repetitions" in g:
            raise InvalidSpec(f"{gp}: give either seeds or repetitions, not both")
        if "seeds" in g:
            seeds = _int_list(g["seeds"], f"{gp}.seeds")
        else:
            reps = g.get("repetitions", 1)
            if not isinstance(reps, int) or isinstance(reps, bool) or reps < 1:
                raise InvalidSpec(f"{gp}.repetitions: expected an integer >= 1")
            seeds = list(range(reps))
        extra = {}
        for key in ("eta", "zeta", "alpha", "beta"):
            if key in g:
                v = g[key]
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise InvalidSpec(f"{gp}.{key}: expected a number")
                extra[key] = float(v)
        grids.append(GridSpec(family, n_values, p_values, seeds, **extra))
    solvers = _need(doc, "solvers", path)
    if not isinstance(solvers, list) or not solvers:
        raise InvalidSpec(f"{path}.solvers: expected a nonempty list")
    for si, s in enumerate(solvers):
        if s not in SOLVER_NAMES:
            raise InvalidSpec(
                f"{path}.solvers[{si}]: unknown solver {s!r}; choose from {list(SOLVER_NAMES)}"
            )
    cfg = ConfigOverrides()
    if "config" in doc:
        c = doc["config"]
        cp = f"{path}.config"
        if not isinstance(c, dict):
            raise InvalidSpec(f"{cp}: expected a JSON object")
        if "gamma_mode" in c:
            if c["gamma_mode"] not in ("practical", "theory"):
                raise InvalidSpec(f"{cp}.gamma_mode: expected 'practical' or 'theory'")
            cfg.gamma_mode = c["gamma_mode"]
        if "corrections" in c:
            cfg.corrections = str(c["corrections"])
            cfg.schedule()  # validates, raises with a field path below on failure
        if "max_iter" in c:
            mi = c["max_iter"]
            if not isinstance(mi, int) or isinstance(mi, bool) or mi < 1:
                raise InvalidSpec(f"{cp}.max_iter: expected an integer >= 1")
            cfg.max_iter = mi
        unknown = set(c) - {"gamma_mode", "corrections", "max_iter"}
        if unknown:
            raise InvalidSpec(f"{cp}.{sorted(unknown)[0]}: unknown field")
    return ExperimentSpec(master_seed, grids, solvers, cfg)


def load_experiment_spec(path: Path) -> ExperimentSpec:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidSpec(f"{path}: not valid JSON ({e})") from e
    return parse_experiment_spec(doc, path=path.name)


def grid_params(grid: GridSpec) -> list[GenParams]:
    defaults = _FAMILY_DEFAULTS[grid.family]
    out = []
    for n in grid.n_values:
        for p in grid.p_values:
            for seed in grid.seeds:
                out.append(
                    GenParams(
                        n=n,
                        p=p,
                        eta=grid.eta if grid.eta is not None else defaults["eta"],
                        zeta=grid.zeta if grid.zeta is not None else defaults["zeta"],
                        alpha=grid.alpha if grid.alpha is not None else defaults["alpha"],
                        beta=grid.beta if grid.beta is not None else defaults["beta"],
                        seed=seed,
                    )
                )
    return out


def iter_instances(spec: ExperimentSpec) -> list[tuple[int, GenParams]]:
    out = []
    for grid in spec.grids:
        out.extend((grid.family, params) for params in grid_params(grid))
    return out


def initial_point(n: int, p: int, master_seed: int, instance_seed: int) -> np.ndarray:
    """Shared starting point: one draw keyed by (master, instance) seed, so
    every solver on the same instance starts from the same X0.

    The key is pushed through one splitmix64 draw before seeding.  A raw
    XOR key can coincide with the instance seed itself (master 0 does so
    for every instance), and gaussian_matrix fills column-major, making X0
    the orthonormalization of the same columns that built the instance's
    eigenbasis E: an exact critical point, which silently breaks any run
    started there.  Hashing the key keeps the two streams disjoint."""
    mix = (master_seed ^ instance_seed) & 0xFFFFFFFFFFFFFFFF
    key = splitmix64_stream(mix, 1)[0]
    return orthonormalize_qr(DeterministicRng(key).gaussian_matrix(n, p))


def build_solver_config(
    model, family: int, solver_name: str, overrides: ConfigOverrides
) -> SolveConfig:
    schedule, fixed_count = overrides.schedule()
    kind = _KIND_BY_SOLVER.get(solver_name, "GP")
    return default_solve_config(
        model,
        family=family,
        kind=kind,
        gamma_mode=overrides.gamma_mode,
        schedule=schedule,
        fixed_count=fixed_count,
        max_iter=overrides.max_iter,
    )


@dataclass
class BenchRow:
    instance: str
    solver: str
    status: str
    iters: int
    f: float
    f_min: float
    fval_variance: float
    kkt_violation: float
    feasibility: float
    wall_s: float


def run_single(
    family: int,
    params: GenParams,
    solver_name: str,
    master_seed: int,
    overrides: ConfigOverrides,
    allow_large: bool = False,
) -> BenchRow:
    instance = instance_filename(family, params)[: -len(".json")]
    t0 = time.monotonic()
    try:
        model = gen_problem(family, params, allow_large=allow_large)
        cfg = build_solver_config(model, family, solver_name, overrides)
        cfg.record_trace = False
        X0 = initial_point(params.n, params.p, master_seed, params.seed)
        if solver_name == "qrbase":
            rep = solve_qr_baseline(model, X0, cfg)
        else:
            rep = solve(model, X0, cfg)
    except Exception as e:  # record the failure, keep the grid running
        wall = time.monotonic() - t0
        return BenchRow(
            instance, solver_name, f"error:{type(e).__name__}", 0,
            math.nan, math.nan, math.nan, math.nan, math.nan, wall,
        )
    wall = time.monotonic() - t0
    G = model.eval_grad(rep.final_X)
    return BenchRow(
        instance=instance,
        solver=solver_name,
        status=rep.status,
        iters=rep.iters,
        f=rep.f_final,
        f_min=math.nan,  # filled in after the whole grid finishes
        fval_variance=math.nan,
        kkt_violation=kkt_residual_norm(rep.final_X, G),
        feasibility=feasibility_violation(rep.final_X),
        wall_s=wall,
    )


def _bench_task(args) -> BenchRow:
    return run_single(*args)


def finalize_rows(rows: list[BenchRow]) -> list[BenchRow]:
    """Sort by (instance, solver), fill f_min per instance and fval_variance."""
    rows = sorted(rows, key=lambda r: (r.instance, r.solver))
    by_instance: dict[str, list[BenchRow]] = {}
    for r in rows:
        by_instance.setdefault(r.instance, []).append(r)
    for group in by_instance.values():
        finite = [r.f for r in group if math.isfinite(r.f)]
        f_min = min(finite) if finite else math.nan
        for r in group:
            r.f_min = f_min
            if math.isfinite(r.f) and math.isfinite(f_min):
                r.fval_variance = abs(r.f - f_min) / (1.0 + abs(f_min)) + EPS_MACHINE
    return rows


def run_bench(
    spec: ExperimentSpec, workers: int = 1, allow_large: bool = False
) -> list[BenchRow]:
    tasks = [
        (family, params, solver, spec.master_seed, spec.config, allow_large)
        for family, params in iter_instances(spec)
        for solver in spec.solvers
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_task, tasks))
    else:
        rows = [_bench_task(t) for t in tasks]
    return finalize_rows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def results_csv_lines(rows: list[BenchRow]) -> list[str]:
    # Consistency check on write: f_min really is the per-instance minimum.
    by_instance: dict[str, list[BenchRow]] = {}
    for r in rows:
        by_instance.setdefault(r.instance, []).append(r)
    for group in by_instance.values():
        finite = [r.f for r in group if math.isfinite(r.f)]
        if finite:
            expect = min(finite)
            for r in group:
                assert r.f_min == expect, f"f_min mismatch on {r.instance}"
    lines = [RESULTS_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.instance,
                    r.solver,
                    r.status,
                    str(r.iters),
                    _fmt(r.f),
                    _fmt(r.f_min),
                    _fmt(r.fval_variance),
                    _fmt(r.kkt_violation),
                    _fmt(r.feasibility),
                    _fmt(r.wall_s),
                ]
            )
        )
    return lines


def write_results_csv(path: Path, rows: list[BenchRow]) -> None:
    Path(path).write_text("\n".join(results_csv_lines(rows)) + "\n", encoding="utf-8")


def read_results_csv(path: Path) -> list[BenchRow]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise InvalidSpec(f"{path}: unexpected results.csv header")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 10:
            raise InvalidSpec(f"{path}: malformed row {ln!r}")
        out.append(
            BenchRow(
                instance=parts[0],
                solver=parts[1],
                status=parts[2],
                iters=int(parts[3]),
                f=float(parts[4]),
                f_min=float(parts[5]),
                fval_variance=float(parts[6]),
                kkt_violation=float(parts[7]),
                feasibility=float(parts[8]),
                wall_s=float(parts[9]),
            )
        )
    return out


@dataclass
class ProfileTable:
    solvers: list[str]
    instances: list[str]
    ratios: np.ndarray  # (instances, solvers), FAIL_RATIO where failed
    omega: np.ndarray
    curves: np.ndarray  # (len(omega), solvers)


def profile_table(rows: list[BenchRow], omega_max: float, grid_points: int) -> ProfileTable:
    """Timing ratios r = t / min t per instance and the fraction-solved
    curves on a log-spaced grid in [1, omega_max]."""
    solvers = sorted({r.solver for r in rows})
    if len(solvers) < 2:
        raise SingleSolver("performance profiles need at least two solvers")
    if omega_max < 1.0:
        raise ValueError("omega_max must be >= 1")
    if grid_points < 1:
        raise ValueError("grid_points must be >= 1")
    instances = sorted({r.instance for r in rows})
    sidx = {s: j for j, s in enumerate(solvers)}
    iidx = {m: i for i, m in enumerate(instances)}
    t = np.full((len(instances), len(solvers)), np.nan)
    ok = np.zeros_like(t, dtype=bool)
    for r in rows:
        i, j = iidx[r.instance], sidx[r.solver]
        t[i, j] = r.wall_s
        ok[i, j] = r.status.startswith("Converged")
    ratios = np.full_like(t, FAIL_RATIO)
    for i in range(len(instances)):
        good = ok[i]
        if good.any():
            tmin = t[i, good].min()
            ratios[i, good] = t[i, good] / tmin if tmin > 0 else 1.0
    omega = np.logspace(0.0, np.log10(omega_max), grid_points)
    curves = (ratios[:, None, :] <= omega[None, :, None]).mean(axis=0)
    return ProfileTable(solvers, instances, ratios, omega, curves)


def profile_csv_lines(table: ProfileTable) -> list[str]:
    lines = [",".join(["omega"] + table.solvers)]
    for gi in range(table.omega.size):
        vals = [repr(float(table.omega[gi]))]
        vals += [repr(float(table.curves[gi, j])) for j in range(len(table.solvers))]
        lines.append(",".join(vals))
    return lines


def write_profile_csv(path: Path, table: ProfileTable) -> None:
    Path(path).write_text("\n".join(profile_csv_lines(table)) + "\n", encoding="utf-8")
