"""Experiment spec parsing, grid runs, results CSV, performance profiles."""

import math

import numpy as np
import pytest

from stiefel_mcm.bench import (
    EPS_MACHINE,
    FAIL_RATIO,
    RESULTS_HEADER,
    SOLVER_NAMES,
    BenchRow,
    ConfigOverrides,
    ExperimentSpec,
    GridSpec,
    finalize_rows,
    grid_params,
    initial_point,
    iter_instances,
    parse_experiment_spec,
    profile_csv_lines,
    profile_table,
    read_results_csv,
    results_csv_lines,
    run_bench,
    run_single,
    write_profile_csv,
    write_results_csv,
)
from stiefel_mcm.errors import InvalidSpec, SingleSolver
from stiefel_mcm.manifold import feasibility_violation
from stiefel_mcm.problems import GenParams


def _minimal_doc(**over):
    doc = {
        "master_seed": 7,
        "grids": [{"family": 1, "n": [60], "p": [3], "seeds": [0]}],
        "solvers": ["gpp", "qrbase"],
    }
    doc.update(over)
    return doc


# ------------------------------------------------------------ spec parsing


def test_parse_minimal_spec():
    spec = parse_experiment_spec(_minimal_doc())
    assert spec.master_seed == 7
    assert spec.solvers == ["gpp", "qrbase"]
    assert spec.config.gamma_mode == "practical"
    assert spec.config.corrections == "delta"
    assert spec.config.max_iter == 3000
    assert spec.grids[0].family == 1 and spec.grids[0].seeds == [0]


def test_parse_repetitions_expand_to_seeds():
    doc = _minimal_doc(grids=[{"family": 2, "n": 60, "p": 4, "repetitions": 3}])
    spec = parse_experiment_spec(doc)
    assert spec.grids[0].seeds == [0, 1, 2]
    assert spec.grids[0].n_values == [60]  # scalar promoted to list


def test_parse_error_paths():
    with pytest.raises(InvalidSpec, match=r"spec: expected a JSON object"):
        parse_experiment_spec([1, 2])
    with pytest.raises(InvalidSpec, match=r"spec\.grids: missing required field"):
        parse_experiment_spec({"solvers": ["gpp"]})
    with pytest.raises(InvalidSpec, match=r"spec\.grids\[0\]\.family: expected 1 or 2"):
        parse_experiment_spec(_minimal_doc(grids=[{"family": 7, "n": [60], "p": [3]}]))
    with pytest.raises(InvalidSpec, match=r"spec\.grids\[0\]: give either seeds or repetitions"):
        parse_experiment_spec(
            _minimal_doc(grids=[{"family": 1, "n": [60], "p": [3], "seeds": [0], "repetitions": 2}])
        )
    with pytest.raises(InvalidSpec, match=r"spec\.solvers\[1\]: unknown solver"):
        parse_experiment_spec(_minimal_doc(solvers=["gpp", "newton"]))
    with pytest.raises(InvalidSpec, match=r"config\.corrections"):
        parse_experiment_spec(_minimal_doc(config={"corrections": "fixed"}))
    with pytest.raises(InvalidSpec, match=r"spec\.config\.workers: unknown field"):
        parse_experiment_spec(_minimal_doc(config={"workers": 4}))
    with pytest.raises(InvalidSpec, match=r"master_seed"):
        parse_experiment_spec(_minimal_doc(master_seed=True))
    with pytest.raises(InvalidSpec, match=r"spec\.grids\[0\]\.n"):
        parse_experiment_spec(_minimal_doc(grids=[{"family": 1, "n": [True], "p": [3]}]))
    with pytest.raises(InvalidSpec, match=r"max_iter"):
        parse_experiment_spec(_minimal_doc(config={"max_iter": 0}))
    with pytest.raises(InvalidSpec, match=r"gamma_mode"):
        parse_experiment_spec(_minimal_doc(config={"gamma_mode": "exact"}))


def test_config_overrides_schedule():
    assert ConfigOverrides(corrections="delta").schedule() == ("delta", 1)
    assert ConfigOverrides(corrections="fixed:4").schedule() == ("fixed", 4)
    with pytest.raises(InvalidSpec):
        ConfigOverrides(corrections="always").schedule()


# ----------------------------------------------------------------- grids


def test_grid_params_order_and_defaults():
    grid = GridSpec(family=1, n_values=[60, 80], p_values=[2, 5], seeds=[0, 1])
    params = grid_params(grid)
    assert len(params) == 8
    # n-major, then p, then seed
    assert [(q.n, q.p, q.seed) for q in params[:4]] == [
        (60, 2, 0), (60, 2, 1), (60, 5, 0), (60, 5, 1),
    ]
    assert all(q.eta == 1.01 and q.alpha == 1.0 for q in params)
    grid2 = GridSpec(family=2, n_values=[60], p_values=[3], seeds=[0], eta=1.2)
    q = grid_params(grid2)[0]
    assert q.eta == 1.2 and q.alpha == 0.1  # family-2 default alpha


def test_iter_instances_concatenates_grids():
    spec = ExperimentSpec(
        master_seed=0,
        grids=[
            GridSpec(1, [60], [2], [0]),
            GridSpec(2, [60], [3], [0, 1]),
        ],
        solvers=["gpp"],
    )
    inst = iter_instances(spec)
    assert [fam for fam, _ in inst] == [1, 2, 2]


def test_initial_point_deterministic_and_feasible():
    A = initial_point(30, 4, master_seed=7, instance_seed=3)
    B = initial_point(30, 4, master_seed=7, instance_seed=3)
    C = initial_point(30, 4, master_seed=8, instance_seed=3)
    assert np.array_equal(A, B)
    assert not np.array_equal(A, C)
    assert feasibility_violation(A) <= 1e-12


def test_initial_point_stream_disjoint_from_generator():
    # master 0 makes the raw key equal the instance seed; the start draw
    # must still differ from the generator's leading columns, otherwise X0
    # is the instance's own eigenbasis (an exact critical point).
    from stiefel_mcm.manifold import orthonormalize_qr, symmetry_violation
    from stiefel_mcm.problems import default_params2, gen_problem
    from stiefel_mcm.rng import DeterministicRng

    for seed in range(3):
        X0 = initial_point(40, 4, master_seed=0, instance_seed=seed)
        raw = orthonormalize_qr(DeterministicRng(seed).gaussian_matrix(40, 4))
        assert not np.allclose(X0, raw, atol=1e-12)
        prob = gen_problem(2, default_params2(40, 4, seed))
        assert symmetry_violation(X0, prob.eval_grad(X0)) > 1e-6


# ------------------------------------------------------------- finalizing


def _row(instance, solver, f, status="ConvergedKKT", wall=1.0):
    return BenchRow(
        instance=instance, solver=solver, status=status, iters=10,
        f=f, f_min=math.nan, fval_variance=math.nan,
        kkt_violation=0.0, feasibility=0.0, wall_s=wall,
    )


def test_finalize_rows_fmin_and_variance():
    rows = [
        _row("b_inst", "gpp", f=-2.0),
        _row("a_inst", "qrbase", f=-1.0),
        _row("a_inst", "gpp", f=-1.5),
    ]
    out = finalize_rows(rows)
    assert [(r.instance, r.solver) for r in out] == [
        ("a_inst", "gpp"), ("a_inst", "qrbase"), ("b_inst", "gpp"),
    ]
    assert out[0].f_min == -1.5 and out[1].f_min == -1.5 and out[2].f_min == -2.0
    # the best row's variance is exactly the machine epsilon floor
    assert out[0].fval_variance == EPS_MACHINE
    assert out[1].fval_variance == abs(-1.0 - -1.5) / (1.0 + 1.5) + EPS_MACHINE


def test_finalize_rows_with_errors():
    rows = [
        _row("x", "gpp", f=math.nan, status="error:InstanceTooLarge"),
        _row("x", "qrbase", f=2.0),
    ]
    out = finalize_rows(rows)
    assert out[1].f_min == 2.0 if out[1].solver == "qrbase" else True
    err = next(r for r in out if r.solver == "gpp")
    good = next(r for r in out if r.solver == "qrbase")
    assert math.isnan(err.fval_variance)
    assert good.fval_variance == EPS_MACHINE
    # no finite f at all: f_min stays NaN
    only_err = finalize_rows([_row("y", "gpp", f=math.nan, status="error:X")])
    assert math.isnan(only_err[0].f_min)


# ------------------------------------------------------------ results CSV


def test_results_csv_roundtrip(tmp_path):
    rows = finalize_rows(
        [
            _row("i1", "gpp", f=-1.234567890123456789, wall=0.125),
            _row("i1", "qrbase", f=-1.0, wall=0.25),
        ]
    )
    lines = results_csv_lines(rows)
    assert lines[0] == RESULTS_HEADER
    assert len(lines) == 3
    path = tmp_path / "results.csv"
    write_results_csv(path, rows)
    back = read_results_csv(path)
    for a, b in zip(rows, back):
        assert (a.instance, a.solver, a.status, a.iters) == (b.instance, b.solver, b.status, b.iters)
        assert a.f == b.f and a.f_min == b.f_min  # repr() round-trips exactly
        assert a.fval_variance == b.fval_variance and a.wall_s == b.wall_s


def test_results_csv_write_checks_fmin():
    rows = finalize_rows([_row("i1", "gpp", f=-1.0), _row("i1", "qrbase", f=-2.0)])
    rows[0].f_min = -5.0  # doctor it
    with pytest.raises(AssertionError, match="f_min"):
        results_csv_lines(rows)


def test_read_results_csv_rejects_bad_files(tmp_path):
    bad = tmp_path / "r.csv"
    bad.write_text("nope\n", encoding="utf-8")
    with pytest.raises(InvalidSpec, match="header"):
        read_results_csv(bad)
    bad.write_text(RESULTS_HEADER + "\nonly,three,fields\n", encoding="utf-8")
    with pytest.raises(InvalidSpec, match="malformed"):
        read_results_csv(bad)


# --------------------------------------------------------------- profiles


def _profile_rows():
    return [
        _row("A", "s1", f=0.0, status="ConvergedKKT", wall=1.0),
        _row("A", "s2", f=0.0, status="ConvergedRelX", wall=2.0),
        _row("A", "s3", f=0.0, status="MaxIter", wall=0.5),
        _row("B", "s1", f=0.0, status="ConvergedWindow", wall=4.0),
        _row("B", "s2", f=0.0, status="ConvergedKKT", wall=1.0),
        _row("B", "s3", f=0.0, status="ConvergedKKT", wall=8.0),
    ]


def test_profile_hand_computed():
    table = profile_table(_profile_rows(), omega_max=10.0, grid_points=2)
    assert table.solvers == ["s1", "s2", "s3"]
    assert np.allclose(table.omega, [1.0, 10.0])
    # instance A: tmin over converged = 1.0 -> ratios 1, 2, FAIL
    # instance B: tmin = 1.0 -> ratios 4, 1, 8
    expect = np.array([[1.0, 2.0, FAIL_RATIO], [4.0, 1.0, 8.0]])
    assert np.array_equal(table.ratios, expect)
    assert np.allclose(table.curves[0], [0.5, 0.5, 0.0])  # omega = 1
    assert np.allclose(table.curves[1], [1.0, 1.0, 0.5])  # omega = 10


def test_profile_curves_monotone_bounded():
    table = profile_table(_profile_rows(), omega_max=1e3, grid_points=40)
    assert table.curves.shape == (40, 3)
    assert np.all(table.curves >= 0.0) and np.all(table.curves <= 1.0)
    assert np.all(np.diff(table.curves, axis=0) >= 0.0)


def test_profile_missing_pair_counts_as_fail():
    rows = _profile_rows()[:5]  # drop (B, s3)
    table = profile_table(rows, omega_max=10.0, grid_points=2)
    j = table.solvers.index("s3")
    i = table.instances.index("B")
    assert table.ratios[i, j] == FAIL_RATIO


def test_profile_all_failed_instance():
    rows = [
        _row("A", "s1", f=0.0, status="MaxIter", wall=1.0),
        _row("A", "s2", f=0.0, status="StepFailed", wall=1.0),
        _row("B", "s1", f=0.0, status="ConvergedKKT", wall=1.0),
        _row("B", "s2", f=0.0, status="ConvergedKKT", wall=2.0),
    ]
    table = profile_table(rows, omega_max=10.0, grid_points=2)
    assert np.array_equal(table.ratios[0], [FAIL_RATIO, FAIL_RATIO])
    assert np.allclose(table.curves[-1], [0.5, 0.5])


def test_profile_validation():
    with pytest.raises(SingleSolver):
        profile_table([_row("A", "s1", f=0.0)], omega_max=10.0, grid_points=5)
    with pytest.raises(ValueError):
        profile_table(_profile_rows(), omega_max=0.5, grid_points=5)
    with pytest.raises(ValueError):
        profile_table(_profile_rows(), omega_max=10.0, grid_points=0)


def test_profile_csv_lines(tmp_path):
    table = profile_table(_profile_rows(), omega_max=10.0, grid_points=3)
    lines = profile_csv_lines(table)
    assert lines[0] == "omega,s1,s2,s3"
    assert len(lines) == 4
    path = tmp_path / "profile.csv"
    write_profile_csv(path, table)
    body = path.read_text(encoding="utf-8").splitlines()
    assert body == lines
    for ln in body[1:]:
        parts = ln.split(",")
        assert len(parts) == 4
        assert float(parts[0]) >= 1.0


# ------------------------------------------------------------- end to end


def test_run_single_error_row():
    params = GenParams(n=4001, p=2, eta=1.01, zeta=1.01, alpha=1.0, seed=0)
    row = run_single(1, params, "gpp", master_seed=0, overrides=ConfigOverrides())
    assert row.status == "error:InstanceTooLarge"
    assert math.isnan(row.f)


def test_run_bench_small_grid():
    spec = parse_experiment_spec(
        _minimal_doc(config={"max_iter": 800})
    )
    rows = run_bench(spec)
    assert len(rows) == 2
    assert {r.solver for r in rows} == {"gpp", "qrbase"}
    assert all(r.status.startswith("Converged") for r in rows)
    assert all(r.feasibility <= 1e-12 for r in rows)
    assert len({r.f_min for r in rows}) == 1
    best = min(rows, key=lambda r: r.f)
    assert best.fval_variance == EPS_MACHINE
    assert all(r.solver in SOLVER_NAMES for r in rows)
