"""Solver loop: stopping rules, fixed points, trace records, lemma mode."""

import numpy as np
import pytest

from stiefel_mcm.manifold import orthonormalize_qr
from stiefel_mcm.problems import QuadraticProblem, default_params, gen_problem
from stiefel_mcm.rng import DeterministicRng
from stiefel_mcm.solver import (
    STATUSES,
    TRACE_HEADER,
    IterRecord,
    SolveConfig,
    check_stop,
    default_solve_config,
    solve,
    solve_qr_baseline,
    trace_csv_lines,
    write_trace_csv,
)


def _rec(k, kkt=1.0, tol_x=1.0, tol_f=1.0):
    return IterRecord(
        k=k,
        f_value=0.0,
        substationarity=kkt,
        symmetry=0.0,
        kkt=kkt,
        feasibility=0.0,
        tau=1.0,
        corrections_applied=1,
        tol_x=tol_x,
        tol_f=tol_f,
        wall_seconds=0.0,
    )


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolveConfig(T=0)
    with pytest.raises(ValueError):
        SolveConfig(eps_g=0.0)


# --------------------------------------------------------- stopping rules


def test_stop_kkt_boundary_arithmetic():
    # the threshold is the floating-point product eps_g*kkt0; for
    # 1e-5 * 10.0 that product is bit-identical to 1e-4, and the
    # comparison is inclusive, so the exact boundary value fires
    assert 1e-5 * 10.0 == 1e-4
    cfg = SolveConfig(eps_g=1e-5, max_iter=100)
    assert check_stop([_rec(1, kkt=9e-5)], cfg, kkt0=10.0) == "ConvergedKKT"
    assert check_stop([_rec(1, kkt=1e-4)], cfg, kkt0=10.0) == "ConvergedKKT"
    above = np.nextafter(1e-4, np.inf)
    assert check_stop([_rec(1, kkt=above)], cfg, kkt0=10.0) is None


def test_stop_kkt_zero_start():
    # kkt0 = 0: only an exactly-zero residual passes rule 1
    cfg = SolveConfig(max_iter=100)
    assert check_stop([_rec(1, kkt=0.0)], cfg, kkt0=0.0) == "ConvergedKKT"
    assert check_stop([_rec(1, kkt=1e-300)], cfg, kkt0=0.0) is None


def test_stop_relx_relf_disambiguation():
    cfg = SolveConfig(eps_x=2.0**-20, eps_f=2.0**-30, max_iter=100)
    # x-ratio 2^-4, f-ratio 2^-2: x is the tighter fit
    r = _rec(1, tol_x=2.0**-24, tol_f=2.0**-32)
    assert check_stop([r], cfg, kkt0=1.0) == "ConvergedRelX"
    # x-ratio 2^-2, f-ratio 2^-4: f wins
    r = _rec(1, tol_x=2.0**-22, tol_f=2.0**-34)
    assert check_stop([r], cfg, kkt0=1.0) == "ConvergedRelF"
    # exact tie goes to the x rule
    r = _rec(1, tol_x=2.0**-22, tol_f=2.0**-32)
    assert check_stop([r], cfg, kkt0=1.0) == "ConvergedRelX"


def test_stop_rule_priority():
    cfg = SolveConfig(max_iter=5)
    # rule 1 beats rule 2 and the iteration cap
    r = _rec(5, kkt=0.0, tol_x=0.0, tol_f=0.0)
    assert check_stop([r], cfg, kkt0=0.0) == "ConvergedKKT"
    # rule 2 beats the window and the cap
    r = _rec(5, kkt=1.0, tol_x=0.0, tol_f=0.0)
    assert check_stop([r], cfg, kkt0=1.0) == "ConvergedRelX"
    # nothing else satisfied at the cap
    assert check_stop([_rec(5)], cfg, kkt0=1.0) == "MaxIter"
    assert check_stop([_rec(4)], cfg, kkt0=1.0) is None


def test_stop_window_boundary():
    eps_x, eps_f = 1e-6, 1e-10
    cfg = SolveConfig(eps_x=eps_x, eps_f=eps_f, T=2, max_iter=100)
    tx, tf = 10.0 * eps_x, 10.0 * eps_f
    # two identical records: the mean equals the threshold exactly, and the
    # comparison is inclusive
    trace = [_rec(1, tol_x=tx, tol_f=tf), _rec(2, tol_x=tx, tol_f=tf)]
    assert check_stop(trace, cfg, kkt0=1.0) == "ConvergedWindow"
    # one ulp above does not fire
    tx_hi = np.nextafter(tx, np.inf)
    trace = [_rec(1, tol_x=tx_hi, tol_f=tf), _rec(2, tol_x=tx_hi, tol_f=tf)]
    assert check_stop(trace, cfg, kkt0=1.0) is None
    # both means must pass, not just one
    trace = [_rec(1, tol_x=tx, tol_f=1.0), _rec(2, tol_x=tx, tol_f=1.0)]
    assert check_stop(trace, cfg, kkt0=1.0) is None


def test_stop_window_short_history():
    # fewer records than T: the window is whatever history exists
    cfg = SolveConfig(eps_x=1e-6, eps_f=1e-10, T=5, max_iter=100)
    r = _rec(1, tol_x=10.0 * 1e-6, tol_f=10.0 * 1e-10)
    assert check_stop([r], cfg, kkt0=1.0) == "ConvergedWindow"


# ------------------------------------------------------------ fixed points


def test_eigenvector_start_diag_converges_kkt():
    # X0 = e1 is stationary for M = diag(1,2,3); the correction flips the
    # sign (multiplier 1 > gamma), which keeps the residual exactly zero
    model = QuadraticProblem(np.diag([1.0, 2.0, 3.0]), np.zeros((3, 1)))
    X0 = np.array([[1.0], [0.0], [0.0]])
    report = solve(model, X0, default_solve_config(model))
    assert report.status == "ConvergedKKT"
    assert report.iters == 1
    assert abs(report.f_final - 0.5) < 1e-12
    assert np.abs(np.abs(report.final_X) - X0).max() < 1e-12


def test_eigenvector_start_generated_matrix():
    # bottom eigenvectors of a generated matrix: the solver recognizes the
    # point within two iterations and leaves f unchanged
    M = gen_problem(1, default_params(1, 60, 4, seed=0)).M
    model = QuadraticProblem(M, np.zeros((60, 4)))
    w, V = np.linalg.eigh(M)
    X0 = V[:, :4]
    f0 = model.eval_f(X0)
    report = solve(model, X0, default_solve_config(model, family=1))
    assert report.status.startswith("Converged")
    assert report.iters <= 2
    assert abs(report.f_final - f0) <= 1e-12 * (1 + abs(f0))


def test_qr_baseline_stationary_start():
    # G = X S with S symmetric makes the Riemannian gradient vanish
    class _StationaryModel:
        rho_bound = 1.0
        scale_s = 1.0

        def __init__(self, S):
            self.S = S

        def eval_f_grad(self, X):
            return 1.0, X @ self.S

        def grad_norm_bound(self):
            return 5.0

    S = np.array([[2.0, 1.0], [1.0, 3.0]])
    X0 = orthonormalize_qr(DeterministicRng(30).gaussian_matrix(7, 2))
    report = solve_qr_baseline(_StationaryModel(S), X0, SolveConfig())
    assert report.status.startswith("Converged")
    assert report.iters == 1
    assert np.abs(report.final_X - X0).max() < 1e-12


def test_qr_baseline_eigenvector_start():
    # exact stationary data: the residual is identically zero, so the
    # relative-KKT rule fires on the first iterate
    model = QuadraticProblem(np.diag([1.0, 2.0, 3.0]), np.zeros((3, 1)))
    X0 = np.array([[1.0], [0.0], [0.0]])
    report = solve_qr_baseline(model, X0, default_solve_config(model))
    assert report.status == "ConvergedKKT"
    assert report.iters == 1
    assert np.abs(report.final_X - X0).max() == 0.0


# ------------------------------------------------------------- full runs


def test_max_iter_one_gives_single_record():
    prob = gen_problem(1, default_params(1, 60, 4, seed=1))
    X0 = orthonormalize_qr(DeterministicRng(31).gaussian_matrix(60, 4))
    cfg = default_solve_config(prob, family=1, max_iter=1)
    report = solve(prob, X0, cfg)
    assert report.iters == 1
    assert len(report.trace) == 1
    assert report.status == "MaxIter"


def test_feasibility_every_iterate_practical_mode():
    for family, kind in ((1, "GP"), (1, "GR"), (2, "GP"), (2, "CBCD")):
        prob = gen_problem(family, default_params(family, 60, 4, seed=2))
        X0 = orthonormalize_qr(DeterministicRng(32).gaussian_matrix(60, 4))
        cfg = default_solve_config(prob, family=family, kind=kind, max_iter=300)
        report = solve(prob, X0, cfg)
        assert report.status in STATUSES
        assert all(rec.feasibility <= 1e-12 for rec in report.trace)
    report = solve_qr_baseline(prob, X0, cfg)
    assert all(rec.feasibility <= 1e-12 for rec in report.trace)


def test_monotone_descent_theory_mode():
    # monotonicity is a consequence of the sufficient-decrease reduction,
    # which the fixed stepsize tau = 1/(2 rho) guarantees; the alternating
    # BB stepsize is deliberately nonmonotone and carries no such promise
    for family, kind in ((1, "GP"), (1, "GR"), (2, "GP"), (2, "CBCD")):
        prob = gen_problem(family, default_params(family, 60, 4, seed=2))
        X0 = orthonormalize_qr(DeterministicRng(32).gaussian_matrix(60, 4))
        cfg = default_solve_config(
            prob, family=family, kind=kind, gamma_mode="theory",
            lemma_check=True, max_iter=150,
        )
        report = solve(prob, X0, cfg)
        f_prev = prob.eval_f(X0)
        for rec in report.trace:
            assert rec.f_value <= f_prev + 1e-12 * (1 + abs(f_prev))
            f_prev = rec.f_value


def test_monotone_descent_cbcd():
    # the CBCD sweep accepts a column update only on verified decrease, so
    # iterations that apply no correction never increase f regardless of
    # mode; corrections are descent steps only when gamma exceeds the
    # curvature bound, so full-trace monotonicity is a theory-mode property
    prob = gen_problem(2, default_params(2, 60, 4, seed=12))
    X0 = orthonormalize_qr(DeterministicRng(40).gaussian_matrix(60, 4))
    report = solve(prob, X0, default_solve_config(prob, family=2, kind="CBCD", max_iter=300))
    f_prev = prob.eval_f(X0)
    corr_prev = 0
    for rec in report.trace:
        if rec.corrections_applied == corr_prev:
            assert rec.f_value <= f_prev + 1e-12 * (1 + abs(f_prev))
        f_prev, corr_prev = rec.f_value, rec.corrections_applied

    report = solve(
        prob, X0,
        default_solve_config(prob, family=2, kind="CBCD", gamma_mode="theory", max_iter=300),
    )
    f_prev = prob.eval_f(X0)
    for rec in report.trace:
        assert rec.f_value <= f_prev + 1e-12 * (1 + abs(f_prev))
        f_prev = rec.f_value


def test_kkt_decomposition_invariant_on_traces():
    # kkt^2 = substationarity^2 + symmetry^2 on every recorded iterate
    prob = gen_problem(2, default_params(2, 60, 5, seed=3))
    X0 = orthonormalize_qr(DeterministicRng(33).gaussian_matrix(60, 5))
    for runner in (solve, solve_qr_baseline):
        report = runner(prob, X0, default_solve_config(prob, family=2, max_iter=150))
        assert len(report.trace) >= 1
        for rec in report.trace:
            lhs = rec.kkt**2
            rhs = rec.substationarity**2 + rec.symmetry**2
            assert abs(lhs - rhs) <= 1e-8 * max(lhs, 1e-30)


def test_c1_measured_positive():
    prob = gen_problem(1, default_params(1, 60, 4, seed=4))
    X0 = orthonormalize_qr(DeterministicRng(34).gaussian_matrix(60, 4))
    report = solve(prob, X0, default_solve_config(prob, family=1, max_iter=200))
    assert report.c1_measured is not None and report.c1_measured > 0


def test_record_trace_disabled():
    prob = gen_problem(1, default_params(1, 60, 3, seed=5))
    X0 = orthonormalize_qr(DeterministicRng(35).gaussian_matrix(60, 3))
    cfg = default_solve_config(prob, family=1, max_iter=50)
    cfg.record_trace = False
    report = solve(prob, X0, cfg)
    assert report.trace == []
    assert report.iters >= 1


def test_rejects_infeasible_start():
    prob = gen_problem(1, default_params(1, 60, 3, seed=6))
    with pytest.raises(ValueError, match="X0"):
        solve(prob, np.ones((60, 3)), default_solve_config(prob, family=1))


# -------------------------------------------------------------- lemma mode


def test_lemma_mode_forces_theory_parameters(caplog):
    prob = gen_problem(1, default_params(1, 60, 4, seed=7))
    X0 = orthonormalize_qr(DeterministicRng(36).gaussian_matrix(60, 4))
    cfg = default_solve_config(prob, family=1, gamma_mode="practical", lemma_check=True, max_iter=150)
    assert cfg.correction.gamma <= prob.rho_bound  # practical gamma is tiny
    with caplog.at_level("WARNING", logger="stiefel_mcm.solver"):
        report = solve(prob, X0, cfg)
    assert report.gamma == 2.0 * prob.rho_bound
    tau_fix = 1.0 / (2.0 * prob.rho_bound)
    assert all(rec.tau == tau_fix for rec in report.trace)
    assert any("lemma_check" in r.getMessage() for r in caplog.records)
    assert report.lemma_violations == []
    assert len(report.audit) == report.iters
    assert report.grad_spec_max > 0


def test_lemma_mode_clean_on_both_families():
    for family in (1, 2):
        prob = gen_problem(family, default_params(family, 60, 5, seed=8))
        X0 = orthonormalize_qr(DeterministicRng(37 + family).gaussian_matrix(60, 5))
        cfg = default_solve_config(
            prob, family=family, gamma_mode="theory", lemma_check=True, max_iter=150
        )
        report = solve(prob, X0, cfg)
        assert report.lemma_violations == []


# ------------------------------------------------------------- trace CSV


def test_trace_csv_format_and_roundtrip(tmp_path):
    prob = gen_problem(1, default_params(1, 60, 4, seed=9))
    X0 = orthonormalize_qr(DeterministicRng(39).gaussian_matrix(60, 4))
    report = solve(prob, X0, default_solve_config(prob, family=1, max_iter=30))
    lines = trace_csv_lines(report.trace)
    assert lines[0] == TRACE_HEADER
    assert len(lines) == len(report.trace) + 1
    for line, rec in zip(lines[1:], report.trace):
        parts = line.split(",")
        assert len(parts) == 11
        assert int(parts[0]) == rec.k
        assert int(parts[7]) == rec.corrections_applied
        # %.17g round-trips doubles exactly
        assert float(parts[1]) == rec.f_value
        assert float(parts[4]) == rec.kkt
        assert float(parts[8]) == rec.tol_x
        assert float(parts[9]) == rec.tol_f
    path = tmp_path / "trace.csv"
    write_trace_csv(path, report.trace)
    assert path.read_text(encoding="utf-8") == "\n".join(lines) + "\n"
