"""Driver loop: reduction step plus multipliers correction, with stopping
rules, iterate trace, optional inequality checking, and a QR-retraction
baseline solver for comparisons.

Per iteration k: compute the stepsize (alternating BB by default), produce
the intermediate point Xbar by GR, GP or CBCD, then apply the scheduled
number of proximal corrections.  Stopping rules are evaluated on the
corrected iterate, in priority order: relative KKT decrease, relative
x/f change, windowed means of those changes, and the iteration cap.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .correction import CorrectionConfig, CorrectionInfo, correction_sweep
from .errors import RankDeficient, StepFailed
from .manifold import (
    feasibility_violation,
    kkt_residual_norm,
    require_stiefel,
    residual_c,
    substationarity,
    symmetry_violation,
)
from .steps import BBState, StepConfig, bb_tau, step_cbcd, step_gp, step_gr

logger = logging.getLogger(__name__)

STATUSES = (
    "ConvergedKKT",
    "ConvergedRelX",
    "ConvergedRelF",
    "ConvergedWindow",
    "MaxIter",
    "StepFailed",
)

TRACE_HEADER = "k,f,substat,sym,kkt,feas,tau,corrections,tol_x,tol_f,wall_s"

_MAX_TAU_HALVINGS = 30


@dataclass
class SolveConfig:
    step: StepConfig = field(default_factory=StepConfig)
    correction: CorrectionConfig = field(default_factory=CorrectionConfig)
    eps_g: float = 1e-5
    eps_x: float = 1e-6
    eps_f: float = 1e-10
    T: int = 5
    max_iter: int = 3000
    lemma_check: bool = False
    record_trace: bool = True

    def __post_init__(self):
        if min(self.eps_g, self.eps_x, self.eps_f) <= 0:
            raise ValueError("tolerances must be positive")
        if self.T < 1:
            raise ValueError("window length T must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class IterRecord:
    k: int
    f_value: float
    substationarity: float
    symmetry: float
    kkt: float
    feasibility: float
    tau: float
    corrections_applied: int
    tol_x: float
    tol_f: float
    wall_seconds: float


@dataclass
class LemmaViolation:
    kind: str
    k: int
    lhs: float
    rhs: float

    def __str__(self):
        return f"{self.kind} at k={self.k}: lhs={self.lhs:.6e} vs rhs={self.rhs:.6e}"


@dataclass
class IterAudit:
    """Per-iteration raw quantities the inequality auditors re-derive from."""

    k: int
    f_in: float
    substat_in: float
    sym_in: float
    f_xbar: float
    f_out: float
    corrections: list[CorrectionInfo]


@dataclass
class SolveReport:
    final_X: np.ndarray
    status: str
    iters: int
    trace: list[IterRecord]
    lemma_violations: list[LemmaViolation]
    audit: list[IterAudit]
    gamma: float
    rho: float
    f_final: float
    c1_measured: float | None
    grad_spec_max: float
    grad_spec_bound: float


def default_solve_config(
    model,
    family: int | None = None,
    kind: str = "GP",
    gamma_mode: str = "practical",
    schedule: str = "delta",
    fixed_count: int = 1,
    max_iter: int = 3000,
    lemma_check: bool = False,
) -> SolveConfig:
    """Paper-default configuration for a given model and problem family.

    Family 1 uses (eps_g, eps_f) = (1e-5, 1e-10); family 2 relaxes to
    (1e-3, 1e-8).  gamma is 1e-3*s in practical mode or 2*rho in theory
    mode; the BB clamp is [1e-10/s, 1e4/s] with tau0 = 1/s.
    """
    if gamma_mode == "practical":
        gamma = 1e-3 * model.scale_s
    elif gamma_mode == "theory":
        gamma = 2.0 * model.rho_bound
    else:
        raise ValueError(f"unknown gamma mode {gamma_mode!r}")
    if gamma <= 0:
        raise ValueError("model scale gives a nonpositive gamma")
    s = model.scale_s if model.scale_s > 0 else 1.0
    step = StepConfig(
        kind=kind,
        tau_policy="abb",
        tau0=1.0 / s,
        tau_min=1e-10 / s,
        tau_max=1e4 / s,
        tau_fixed=1.0 / (2.0 * model.rho_bound) if model.rho_bound > 0 else 1.0 / s,
    )
    eps_g, eps_f = (1e-3, 1e-8) if family == 2 else (1e-5, 1e-10)
    correction = CorrectionConfig(gamma=gamma, schedule=schedule, fixed_count=fixed_count)
    return SolveConfig(
        step=step,
        correction=correction,
        eps_g=eps_g,
        eps_f=eps_f,
        max_iter=max_iter,
        lemma_check=lemma_check,
    )


def check_stop(trace: list[IterRecord], cfg: SolveConfig, kkt0: float) -> str | None:
    """Evaluate stopping rules on the latest record; None means continue."""
    rec = trace[-1]
    if rec.kkt <= cfg.eps_g * kkt0:
        return "ConvergedKKT"
    if rec.tol_x <= cfg.eps_x and rec.tol_f <= cfg.eps_f:
        # name the rule by whichever tolerance is satisfied more tightly
        if rec.tol_x / cfg.eps_x <= rec.tol_f / cfg.eps_f:
            return "ConvergedRelX"
        return "ConvergedRelF"
    w = min(len(trace), cfg.T)
    mean_x = sum(r.tol_x for r in trace[-w:]) / w
    mean_f = sum(r.tol_f for r in trace[-w:]) / w
    if mean_x <= 10.0 * cfg.eps_x and mean_f <= 10.0 * cfg.eps_f:
        return "ConvergedWindow"
    if rec.k >= cfg.max_iter:
        return "MaxIter"
    return None


def _resolve_lemma_mode(model, cfg: SolveConfig) -> SolveConfig:
    """Lemma checking needs gamma > rho and the fixed theory stepsize."""
    if not cfg.lemma_check:
        return cfg
    rho = model.rho_bound
    corr = cfg.correction
    step = cfg.step
    if corr.gamma <= rho:
        logger.warning(
            "lemma_check requires gamma > rho: raising gamma from %.3e to 2*rho = %.3e",
            corr.gamma,
            2.0 * rho,
        )
        corr = replace(corr, gamma=2.0 * rho, z_zero_tol=None)
    if step.kind != "CBCD" and rho > 0:
        tau = 1.0 / (2.0 * rho)
        if step.tau_policy != "fixed" or step.tau_fixed != tau:
            logger.warning("lemma_check forces fixed tau = 1/(2*rho) = %.3e", tau)
            step = replace(step, tau_policy="fixed", tau_fixed=tau)
    return replace(cfg, step=step, correction=corr)


def _reduction_step(X, G, model, step_cfg: StepConfig, tau: float) -> np.ndarray:
    """Dispatch one reduction step; GP retries with halved tau on rank loss."""
    if step_cfg.kind == "CBCD":
        return step_cbcd(X, model, step_cfg)
    if step_cfg.kind == "GR":
        return step_gr(X, G, tau)
    t = tau
    for _ in range(_MAX_TAU_HALVINGS + 1):
        try:
            return step_gp(X, G, t)
        except RankDeficient:
            t *= 0.5
    raise StepFailed(f"GP step rank deficient after {_MAX_TAU_HALVINGS} tau halvings")


def _lemma_checks(
    k: int,
    audit: IterAudit,
    gamma: float,
    rho: float,
    c_gamma: float,
    violations: list[LemmaViolation],
) -> None:
    """Inline inequality checks for one iteration (recorded, never fatal).

    Each correction application is audited individually: the lemmas hold for
    any feasible input point, so repeated corrections inherit them one by one.
    """
    for info in audit.corrections:
        if not info.applied:
            continue
        tol_f = 1e-8 * (1.0 + abs(info.f_before))
        dec = info.f_before - info.f_after
        need = info.sym_before**2 / (8.0 * c_gamma)
        if dec < need - tol_f:
            violations.append(LemmaViolation("fvdtildex", k, dec, need))
        sym_cap = 2.0 * (rho + gamma) * info.step_norm + 1e-10
        if info.sym_after > sym_cap:
            violations.append(LemmaViolation("symk+1", k, info.sym_after, sym_cap))
        if gamma > rho:
            dist_cap = 2.0 / (gamma - rho) * dec + tol_f
            if info.step_norm**2 > dist_cap:
                violations.append(LemmaViolation("fb", k, info.step_norm**2, dist_cap))
        ball_cap = info.grad_fro / gamma + 1e-10
        if info.ball_lhs > ball_cap:
            violations.append(LemmaViolation("ball", k, info.ball_lhs, ball_cap))
    tol_mono = 1e-12 * (1.0 + abs(audit.f_in))
    if audit.f_out > audit.f_in + tol_mono:
        violations.append(LemmaViolation("monotone", k, audit.f_out, audit.f_in))


def solve(model, X0: np.ndarray, cfg: SolveConfig) -> SolveReport:
    """Run the correction method from X0 until a stopping rule fires."""
    require_stiefel(X0, what="X0")
    cfg = _resolve_lemma_mode(model, cfg)
    gamma = cfg.correction.gamma
    rho = model.rho_bound
    grad_bound = model.grad_norm_bound()
    c_gamma = max(grad_bound, 0.0) + gamma

    t0 = time.monotonic()
    X = X0.copy()
    f, G = model.eval_f_grad(X)
    kkt0 = kkt_residual_norm(X, G)
    bb = BBState()
    trace: list[IterRecord] = []
    violations: list[LemmaViolation] = []
    audits: list[IterAudit] = []
    c1: float | None = None
    grad_spec_max = float(np.linalg.norm(G, 2)) if cfg.lemma_check else 0.0
    status = "MaxIter"
    iters = 0

    for k in range(1, cfg.max_iter + 1):
        if cfg.step.kind == "CBCD":
            tau = float("nan")
        elif cfg.step.tau_policy == "fixed":
            tau = cfg.step.tau_fixed
        else:
            tau = bb_tau(bb, X, residual_c(X, G), k, cfg.step)
        try:
            Xbar = _reduction_step(X, G, model, cfg.step, tau)
        except StepFailed as e:
            logger.warning("iteration %d: %s", k, e)
            status = "StepFailed"
            break

        Xp, Gp, fp, infos = correction_sweep(Xbar, model, cfg.correction, k)
        substat_in = substationarity(X, G)
        audit = IterAudit(
            k=k,
            f_in=f,
            substat_in=substat_in,
            sym_in=symmetry_violation(X, G),
            f_xbar=infos[0].f_before,
            f_out=fp,
            corrections=infos,
        )

        num = f - audit.f_xbar
        if substat_in > 0 and num > 1e-14 * (1.0 + abs(f)):
            ratio = num / substat_in**2
            c1 = ratio if c1 is None else min(c1, ratio)

        if cfg.lemma_check:
            audits.append(audit)
            grad_spec_max = max(grad_spec_max, float(np.linalg.norm(Gp, 2)))
            _lemma_checks(k, audit, gamma, rho, c_gamma, violations)

        tol_x = float(np.linalg.norm(Xp - X)) / np.sqrt(X.shape[0])
        tol_f = abs(fp - f) / (abs(f) + 1.0)
        rec = IterRecord(
            k=k,
            f_value=fp,
            substationarity=substationarity(Xp, Gp),
            symmetry=symmetry_violation(Xp, Gp),
            kkt=kkt_residual_norm(Xp, Gp),
            feasibility=feasibility_violation(Xp),
            tau=tau,
            corrections_applied=sum(1 for i in infos if i.applied),
            tol_x=tol_x,
            tol_f=tol_f,
            wall_seconds=time.monotonic() - t0,
        )
        trace.append(rec)
        X, f, G = Xp, fp, Gp
        iters = k

        stop = check_stop(trace, cfg, kkt0)
        if stop is not None:
            status = stop
            break

    if not cfg.record_trace:
        trace = []
    return SolveReport(
        final_X=X,
        status=status,
        iters=iters,
        trace=trace,
        lemma_violations=violations,
        audit=audits,
        gamma=gamma,
        rho=rho,
        f_final=f,
        c1_measured=c1,
        grad_spec_max=grad_spec_max,
        grad_spec_bound=grad_bound,
    )


def solve_qr_baseline(model, X0: np.ndarray, cfg: SolveConfig) -> SolveReport:
    """Riemannian gradient descent with QR retraction and the ABB stepsize.

    The descent direction is xi = G - X sym(X'G); BB differences use xi in
    place of the KKT residual.  Stopping rules match the main solver.
    """
    from .manifold import orthonormalize_qr

    require_stiefel(X0, what="X0")
    t0 = time.monotonic()
    X = X0.copy()
    f, G = model.eval_f_grad(X)

    def riem_grad(X, G):
        S = X.T @ G
        return G - X @ (0.5 * (S + S.T))

    xi = riem_grad(X, G)
    kkt0 = kkt_residual_norm(X, G)
    bb = BBState()
    trace: list[IterRecord] = []
    status = "MaxIter"
    iters = 0

    for k in range(1, cfg.max_iter + 1):
        if cfg.step.tau_policy == "fixed":
            tau = cfg.step.tau_fixed
        else:
            tau = bb_tau(bb, X, xi, k, cfg.step)
        Xp = None
        t = tau
        for _ in range(_MAX_TAU_HALVINGS + 1):
            try:
                Xp = orthonormalize_qr(X - t * xi)
                break
            except RankDeficient:
                t *= 0.5
        if Xp is None:
            logger.warning("iteration %d: QR retraction rank deficient", k)
            status = "StepFailed"
            break
        fp, Gp = model.eval_f_grad(Xp)
        xi_p = riem_grad(Xp, Gp)
        tol_x = float(np.linalg.norm(Xp - X)) / np.sqrt(X.shape[0])
        tol_f = abs(fp - f) / (abs(f) + 1.0)
        rec = IterRecord(
            k=k,
            f_value=fp,
            substationarity=substationarity(Xp, Gp),
            symmetry=symmetry_violation(Xp, Gp),
            kkt=kkt_residual_norm(Xp, Gp),
            feasibility=feasibility_violation(Xp),
            tau=tau,
            corrections_applied=0,
            tol_x=tol_x,
            tol_f=tol_f,
            wall_seconds=time.monotonic() - t0,
        )
        trace.append(rec)
        X, f, G, xi = Xp, fp, Gp, xi_p
        iters = k
        stop = check_stop(trace, cfg, kkt0)
        if stop is not None:
            status = stop
            break

    if not cfg.record_trace:
        trace = []
    return SolveReport(
        final_X=X,
        status=status,
        iters=iters,
        trace=trace,
        lemma_violations=[],
        audit=[],
        gamma=cfg.correction.gamma,
        rho=model.rho_bound,
        f_final=f,
        c1_measured=None,
        grad_spec_max=0.0,
        grad_spec_bound=model.grad_norm_bound(),
    )


def trace_csv_lines(trace: list[IterRecord]) -> list[str]:
    lines = [TRACE_HEADER]
    for r in trace:
        lines.append(
            f"{r.k},{r.f_value:.17g},{r.substationarity:.17g},{r.symmetry:.17g},"
            f"{r.kkt:.17g},{r.feasibility:.17g},{r.tau:.17g},{r.corrections_applied},"
            f"{r.tol_x:.17g},{r.tol_f:.17g},{r.wall_seconds:.17g}"
        )
    return lines


def write_trace_csv(path, trace: list[IterRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(trace_csv_lines(trace)) + "\n")
