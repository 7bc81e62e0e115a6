"""Multipliers correction: rotate Xbar within its own range space.

The correction minimizes the proximal linear model
f(Xbar) + <grad, X - Xbar> + (gamma/2)||X - Xbar||^2 over {Xbar Q : Q
orthogonal p x p}, which reduces to minimizing g(Q) = tr(Q'Z) with
Z = Xbar' grad - gamma I.  The global solution is Q* = -U V' from the
SVD Z = U Sigma V'; the achieved model decrease tr(Sigma) + tr(Z) is
nonnegative by construction.  At a point where Z = 0 the multiplier
matrix Xbar' grad equals gamma I, which is symmetric, so the rotation
is skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .manifold import symmetry_violation


@dataclass
class CorrectionConfig:
    """Proximal-correction settings.

    schedule "fixed" applies the rotation fixed_count times per iteration;
    "delta" uses the iteration-indexed count 2*ceil(sqrt(k)/2) - 1.
    z_zero_tol defaults to 1e-14*(1 + gamma): the exact branch condition
    Xbar'G = gamma*I is unattainable in floating point.
    """

    gamma: float = 1.0
    schedule: str = "delta"  # fixed | delta
    fixed_count: int = 1
    z_zero_tol: float | None = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.schedule not in ("fixed", "delta"):
            raise ValueError(f"unknown correction schedule {self.schedule!r}")
        if self.fixed_count < 1:
            raise ValueError("fixed_count must be >= 1")
        if self.z_zero_tol is None:
            self.z_zero_tol = 1e-14 * (1.0 + self.gamma)


def delta_schedule(k: int) -> int:
    """Correction count for iteration k (1-based): 2*ceil(sqrt(k)/2) - 1."""
    if k < 1:
        raise ValueError("iteration index must be >= 1")
    return 2 * math.ceil(math.sqrt(k) / 2.0) - 1


@dataclass
class CorrectionInfo:
    """Per-application record; f_after/sym_after are filled by the sweep.

    ball_lhs and grad_fro support the containment check
    ||X+ - Xbar + grad/gamma|| <= ||grad||/gamma from the distance lemma.
    """

    applied: bool
    sigma_trace: float = 0.0
    model_decrease: float = 0.0
    sym_before: float = 0.0
    sym_after: float = float("nan")
    f_before: float = float("nan")
    f_after: float = float("nan")
    step_norm: float = 0.0
    ball_lhs: float = 0.0
    grad_fro: float = 0.0


def correct_once(
    Xbar: np.ndarray, G: np.ndarray, cfg: CorrectionConfig
) -> tuple[np.ndarray, CorrectionInfo]:
    """Apply one proximal correction at Xbar with gradient G = grad f(Xbar)."""
    p = Xbar.shape[1]
    Z = Xbar.T @ G - cfg.gamma * np.eye(p)
    sym_before = symmetry_violation(Xbar, G)
    if np.linalg.norm(Z) <= cfg.z_zero_tol:
        return Xbar, CorrectionInfo(applied=False, sym_before=sym_before, sym_after=sym_before)
    U, sigma, Vt = np.linalg.svd(Z)
    Q = -(U @ Vt)
    Xplus = Xbar @ Q
    info = CorrectionInfo(
        applied=True,
        sigma_trace=float(sigma.sum()),
        model_decrease=float(sigma.sum() + np.trace(Z)),
        sym_before=sym_before,
        step_norm=float(np.linalg.norm(Xplus - Xbar)),
        ball_lhs=float(np.linalg.norm(Xplus - Xbar + G / cfg.gamma)),
        grad_fro=float(np.linalg.norm(G)),
    )
    assert info.model_decrease >= -1e-12, "proximal model decrease must be nonnegative"
    return Xplus, info


def correction_sweep(
    Xbar: np.ndarray, model, cfg: CorrectionConfig, k: int
) -> tuple[np.ndarray, np.ndarray, float, list[CorrectionInfo]]:
    """Apply the scheduled number of corrections for iteration k.

    The gradient is recomputed at the current point before every
    application; stops early once a rotation is skipped (Z within the zero
    tolerance).  Returns the final point with its gradient and value so the
    caller never re-evaluates.
    """
    if k < 1:
        raise ValueError("iteration index must be >= 1")
    count = cfg.fixed_count if cfg.schedule == "fixed" else delta_schedule(k)
    f_cur, G_cur = model.eval_f_grad(Xbar)
    X_cur = Xbar
    infos: list[CorrectionInfo] = []
    for _ in range(count):
        X_new, info = correct_once(X_cur, G_cur, cfg)
        info.f_before = f_cur
        if not info.applied:
            info.f_after = f_cur
            infos.append(info)
            break
        f_new, G_new = model.eval_f_grad(X_new)
        info.f_after = f_new
        info.sym_after = symmetry_violation(X_new, G_new)
        infos.append(info)
        X_cur, G_cur, f_cur = X_new, G_new, f_new
    return X_cur, G_cur, f_cur, infos


def rotation_optimality_gap(
    Xbar: np.ndarray, G: np.ndarray, gamma: float, Q_test: np.ndarray
) -> float:
    """g(Q_test) - g(Q*) for the rotation model g(Q) = tr(Q'Z); always >= 0.

    Raises ValueError if Q_test is not orthogonal to 1e-12.
    """
    p = Xbar.shape[1]
    if Q_test.shape != (p, p):
        raise ValueError("Q_test has wrong shape")
    ortho_err = np.linalg.norm(Q_test.T @ Q_test - np.eye(p))
    if ortho_err > 1e-12:
        raise ValueError(f"Q_test is not orthogonal: ||Q'Q - I|| = {ortho_err:.3e}")
    Z = Xbar.T @ G - gamma * np.eye(p)
    sigma = np.linalg.svd(Z, compute_uv=False)
    return float(np.trace(Q_test.T @ Z) + sigma.sum())
