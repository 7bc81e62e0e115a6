"""Function-value reduction steps: GR, GP, CBCD, and the ABB stepsize.

Each step maps a feasible X (and gradient or model) to a feasible
intermediate point with f(Xbar) <= f(X).  GR reflects X across the range
of V = X - tau*G with a Householder-type transform built from p x p
factorizations only; GP polar-projects X - tau*G; CBCD sweeps columns in
Gauss-Seidel order, solving each sphere-constrained column subproblem in
the null space of the remaining columns.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import SubproblemFailed
from .manifold import FEAS_TOL, feasibility_violation, orthonormalize_qr, project_stiefel_polar

logger = logging.getLogger(__name__)

# Relative cutoff for the (V'V) pseudo-inverse in GR.
_PINV_TOL = 1e-12

# BB inner products below this are treated as zero (keep previous tau).
_BB_DENOM_TOL = 1e-20

_SECULAR_MAX_ITER = 200


@dataclass
class StepConfig:
    """Reduction-step settings shared by all three step kinds.

    tau_policy "abb" alternates the two BB stepsizes (BB1 on odd k, BB2 on
    even k) clamped to [tau_min, tau_max]; "fixed" always uses tau_fixed.
    k1/k2 are CBCD's acceptance constants (descent and step-size safeguard).
    """

    kind: str = "GP"  # GR | GP | CBCD
    tau_policy: str = "abb"  # abb | fixed
    tau_fixed: float = 1e-3
    tau0: float = 1e-3
    tau_min: float = 1e-13
    tau_max: float = 1e1
    cbcd_k1: float = 1e-4
    cbcd_k2: float = 1e-4
    cbcd_mode: str = "exact"  # exact | projgrad

    def __post_init__(self):
        if self.kind not in ("GR", "GP", "CBCD"):
            raise ValueError(f"unknown step kind {self.kind!r}")
        if self.tau_policy not in ("abb", "fixed"):
            raise ValueError(f"unknown tau policy {self.tau_policy!r}")
        if not (0 < self.tau_min <= self.tau_max):
            raise ValueError("need 0 < tau_min <= tau_max")
        if self.cbcd_k1 <= 0 or self.cbcd_k2 <= 0:
            raise ValueError("k1 and k2 must be positive")


@dataclass
class BBState:
    """History for the alternating BB rule: previous iterate, residual, tau."""

    prev_X: np.ndarray | None = None
    prev_c: np.ndarray | None = None
    prev_tau: float | None = None


def bb_tau(state: BBState, X: np.ndarray, c: np.ndarray, k: int, cfg: StepConfig) -> float:
    """Alternating BB stepsize for (1-based) iteration k; updates state.

    tau_BB1 = |<J,K>|/<K,K> on odd k, tau_BB2 = <J,J>/|<J,K>| on even k,
    with J = X - X_prev and K = c - c_prev.  The first call (no history)
    returns tau0; a denominator below 1e-20 returns the previous tau.
    """
    if state.prev_X is None:
        tau = cfg.tau0
    else:
        J = X - state.prev_X
        K = c - state.prev_c
        jk = abs(float(np.vdot(J, K)))
        if k % 2 == 1:
            kk = float(np.vdot(K, K))
            tau = jk / kk if kk >= _BB_DENOM_TOL else state.prev_tau
        else:
            jj = float(np.vdot(J, J))
            tau = jj / jk if jk >= _BB_DENOM_TOL else state.prev_tau
    tau = float(min(max(tau, cfg.tau_min), cfg.tau_max))
    state.prev_X = X.copy()
    state.prev_c = c.copy()
    state.prev_tau = tau
    return tau


def step_gr(X: np.ndarray, G: np.ndarray, tau: float) -> np.ndarray:
    """Householder-type reflection of X across range(V), V = X - tau*G.

    Xbar = -X + 2 V (V'V)^+ (V'X); only p x p matrices are factorized.
    The pseudo-inverse zeroes singular values below 1e-12 of the largest,
    so a rank-deficient V degrades gracefully instead of failing.
    """
    V = X - tau * G
    W = V.T @ V
    U, sig, Vt = np.linalg.svd(W)
    inv = np.zeros_like(sig)
    keep = sig > _PINV_TOL * sig[0] if sig[0] > 0 else np.zeros_like(sig, dtype=bool)
    inv[keep] = 1.0 / sig[keep]
    Xbar = -X + 2.0 * (V @ (Vt.T @ (inv[:, None] * (U.T @ (V.T @ X)))))
    if feasibility_violation(Xbar) > FEAS_TOL:
        logger.warning("GR output off the manifold; re-orthonormalizing")
        Xbar = orthonormalize_qr(Xbar)
    return Xbar


def step_gp(X: np.ndarray, G: np.ndarray, tau: float) -> np.ndarray:
    """Polar projection of X - tau*G onto the manifold.

    Raises RankDeficient when X - tau*G loses numerical rank; the solver
    reacts by halving tau and retrying.
    """
    return project_stiefel_polar(X - tau * G)


def sphere_quadratic_min(
    H: np.ndarray, b: np.ndarray, ref: np.ndarray | None = None
) -> np.ndarray:
    """Global minimizer of 1/2 z'Hz + b'z over the unit sphere.

    Eigendecomposition of H plus a safeguarded Newton solve of the secular
    equation sum_j (bhat_j/(lambda_j + mu))^2 = 1 for mu >= -lambda_min;
    the hard case (bhat orthogonal to the bottom eigenspace with interior
    regular solution) adds the required bottom-eigenvector component.  When
    the minimizer is non-unique, `ref` breaks the tie toward max <z, ref>.
    """
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    lam, V = np.linalg.eigh(H)
    bhat = V.T @ b
    norm_b = float(np.linalg.norm(b))
    scale = max(1.0, abs(float(lam[0])), abs(float(lam[-1])), norm_b)

    def oriented(z):
        if ref is not None and float(np.dot(z, ref)) < 0.0:
            return -z
        return z

    if norm_b <= 1e-15 * scale:
        return oriented(V[:, 0].copy())

    bottom = lam <= lam[0] + 1e-12 * scale
    b_bot = float(np.sqrt(np.sum(bhat[bottom] ** 2)))
    if b_bot <= 1e-13 * scale:
        # candidate hard case: regular part at mu = -lambda_min
        top = ~bottom
        denom = lam[top] - lam[0]
        coef = np.zeros_like(bhat)
        coef[top] = -bhat[top] / denom
        nrm2 = float(np.sum(coef**2))
        if nrm2 <= 1.0:
            t = np.sqrt(max(0.0, 1.0 - nrm2))
            z = V @ coef + oriented(t * V[:, 0])
            return z / np.linalg.norm(z)
        # interior norm exceeds 1: the secular root lies above -lambda_min

    # Secular root bracket: ||z(mu)|| >= 1 at lo and <= 1 at hi.
    lo = max(-float(lam[0]), norm_b - float(lam[-1]))
    hi = norm_b - float(lam[0])
    mu = 0.5 * (lo + hi)

    for _ in range(_SECULAR_MAX_ITER):
        with np.errstate(divide="ignore", invalid="ignore"):
            w = bhat / (lam + mu)
        nz = float(np.linalg.norm(w))
        if not np.isfinite(nz):  # hit a pole: mu is certainly too small
            lo = mu
            mu = 0.5 * (lo + hi)
            continue
        h = 1.0 / nz - 1.0 if nz > 0.0 else 1.0
        if abs(h) <= 1e-14:
            break
        if h < 0.0:  # ||z|| > 1: mu too small
            lo = mu
        else:
            hi = mu
        # Newton on h(mu) = 1/||z(mu)|| - 1, with h'(mu) = dphi/||z||^3
        dphi = float(np.sum(w**2 / (lam + mu)))
        mu_new = mu - h * nz**3 / dphi if dphi > 0.0 else 0.5 * (lo + hi)
        if not (lo <= mu_new <= hi):
            mu_new = 0.5 * (lo + hi)
        if abs(mu_new - mu) <= 1e-16 * max(1.0, abs(mu)):
            mu = mu_new
            break
        mu = mu_new
    else:
        raise SubproblemFailed("secular equation Newton did not converge in 200 iterations")

    z = V @ (-bhat / (lam + mu))
    return z / np.linalg.norm(z)


def _null_space_basis(W_rest: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis of null(W_rest') from the complete QR of W_rest."""
    m = W_rest.shape[1]
    if m == 0:
        return np.eye(n)
    Q, _ = np.linalg.qr(W_rest, mode="complete")
    return Q[:, m:]


def _restricted_grad_column(model, W: np.ndarray, i: int) -> np.ndarray:
    """Gradient of x -> f(W with column i replaced by x) at the current column.

    Equals column i of the full gradient at W for any objective.
    """
    return model.eval_grad(W)[:, i]


def _accept(dec: float, step: float, pg_norm: float, cfg: StepConfig) -> bool:
    """Algorithm acceptance: enough descent and a non-vanishing step."""
    return dec >= cfg.cbcd_k1 * step**2 and step >= cfg.cbcd_k2 * pg_norm


def _cbcd_column_projgrad(model, W, i, g_i, pg, cfg: StepConfig):
    """Backtracking projected-gradient update for one column.

    Moves along d = -(I - WW')grad within the feasible subspace (d is
    orthogonal to every column of W, so normalizing X_i + t d keeps the
    sphere and the null-space constraints), halving t until both
    acceptance conditions hold.  Returns None when no t qualifies.
    """
    nd = float(np.linalg.norm(pg))
    if nd == 0.0:
        return None
    x_old = W[:, i].copy()
    f_old = model.eval_f(W)
    d = -pg
    s = model.scale_s if model.scale_s > 0 else 1.0
    t = 1.0 / s
    Wtrial = W.copy()
    for _ in range(60):
        x_new = x_old + t * d
        x_new /= np.linalg.norm(x_new)
        step = float(np.linalg.norm(x_old - x_new))
        Wtrial[:, i] = x_new
        dec = f_old - model.eval_f(Wtrial)
        if _accept(dec, step, nd, cfg):
            return x_new
        t *= 0.5
    return None


def step_cbcd(X: np.ndarray, model, cfg: StepConfig) -> np.ndarray:
    """One Gauss-Seidel sweep of column-wise block coordinate descent.

    For each column i the subproblem min f(W with column i = x) subject to
    ||x|| = 1 and orthogonality to the other columns is solved exactly
    (quadratic/Brockett objectives reduce to a sphere-constrained quadratic
    in null(W_rest')) or by projected-gradient backtracking.  A candidate
    replaces the column only if it passes the descent and step-size
    acceptance conditions; otherwise the column is kept.
    """
    from .problems import BrockettProblem, QuadraticProblem

    n, p = X.shape
    W = X.copy()
    exact = cfg.cbcd_mode == "exact" and isinstance(model, (QuadraticProblem, BrockettProblem))
    for i in range(p):
        x_old = W[:, i].copy()
        g_i = _restricted_grad_column(model, W, i)
        pg = g_i - W @ (W.T @ g_i)
        pg_norm = float(np.linalg.norm(pg))
        x_new = None
        if exact:
            rest = np.delete(W, i, axis=1)
            B = _null_space_basis(rest, n)
            if isinstance(model, QuadraticProblem):
                H = B.T @ (model.M @ B)
                b = B.T @ model.N[:, i]
            else:
                H = model.d[i] * (B.T @ (model.A @ B))
                b = np.zeros(B.shape[1])
            z_cur = B.T @ x_old
            try:
                z_new = sphere_quadratic_min(H, b, ref=z_cur)
            except SubproblemFailed:
                logger.warning("exact column solve failed at column %d; falling back", i)
                x_new = _cbcd_column_projgrad(model, W, i, g_i, pg, cfg)
            else:
                dec = float(
                    0.5 * z_cur @ (H @ z_cur) + b @ z_cur - (0.5 * z_new @ (H @ z_new) + b @ z_new)
                )
                step = float(np.linalg.norm(z_cur - z_new))
                # failed acceptance keeps the column; only a solver failure
                # falls back to the projected-gradient path
                if _accept(dec, step, pg_norm, cfg):
                    x_new = B @ z_new
                    x_new /= np.linalg.norm(x_new)
        else:
            x_new = _cbcd_column_projgrad(model, W, i, g_i, pg, cfg)
        if x_new is not None:
            W[:, i] = x_new
    if feasibility_violation(W) > FEAS_TOL:
        logger.warning("CBCD sweep output off the manifold; re-orthonormalizing")
        W = orthonormalize_qr(W)
    return W
