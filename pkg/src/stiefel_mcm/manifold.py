"""Stiefel-manifold primitives: retractions, residuals, spectral norms.

The manifold is S(n, p) = {X in R^{n x p} : X'X = I_p}.  First-order
stationarity of f on S(n, p) decomposes into a substationarity part
(the gradient component normal to the span of X) and a symmetry part
(X'G - G'X), and the KKT residual c(X) = G - X G'X satisfies

    ||c||^2 = ||G - X X'G||^2 + ||X'G - G'X||^2

exactly, because the two terms live in orthogonal subspaces.
"""

from __future__ import annotations

import numpy as np

from .errors import PowerIterationStalled, RankDeficient

# Feasibility tolerance used everywhere a point must sit on the manifold.
FEAS_TOL = 1e-12

# Relative cutoff declaring a matrix numerically rank deficient.
_RANK_TOL = 1e-12


def orthonormalize_qr(V: np.ndarray) -> np.ndarray:
    """Thin QR factor of V with the sign convention diag(R) >= 0.

    Raises RankDeficient when the smallest |R_ii| falls below
    1e-12 * max |R_ii|; columns of V are then numerically dependent.
    """
    Q, R = np.linalg.qr(V)
    d = np.abs(np.diag(R))
    if d.size == 0 or d.min() <= _RANK_TOL * d.max():
        raise RankDeficient("QR diagonal ratio below 1e-12: columns are numerically dependent")
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


def project_stiefel_polar(V: np.ndarray) -> np.ndarray:
    """Nearest Stiefel point to V in Frobenius norm, via the polar factor.

    V = R diag(sigma) T' reduced SVD gives the projection R T'.  Raises
    RankDeficient when sigma_min <= 1e-12 * sigma_max, where the polar
    factor stops being unique.
    """
    R, sigma, Tt = np.linalg.svd(V, full_matrices=False)
    if sigma[0] == 0.0 or sigma[-1] <= _RANK_TOL * sigma[0]:
        raise RankDeficient("polar projection undefined: singular value ratio below 1e-12")
    return R @ Tt


def residual_c(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    """KKT residual c(X) = G - X G'X."""
    return G - X @ (G.T @ X)


def substationarity(X: np.ndarray, G: np.ndarray) -> float:
    """Frobenius norm of the component of G normal to span(X): ||(I - XX')G||."""
    return float(np.linalg.norm(G - X @ (X.T @ G)))


def symmetry_violation(X: np.ndarray, G: np.ndarray) -> float:
    """Frobenius norm of X'G - G'X."""
    A = X.T @ G
    return float(np.linalg.norm(A - A.T))


def kkt_residual_norm(X: np.ndarray, G: np.ndarray) -> float:
    """Frobenius norm of the KKT residual c(X)."""
    return float(np.linalg.norm(residual_c(X, G)))


def feasibility_violation(X: np.ndarray) -> float:
    """Frobenius norm of X'X - I."""
    p = X.shape[1]
    return float(np.linalg.norm(X.T @ X - np.eye(p)))


def require_stiefel(X: np.ndarray, tol: float = FEAS_TOL, what: str = "X") -> None:
    """Assert X is feasible to `tol`; raises ValueError naming the offender."""
    v = feasibility_violation(X)
    if not v <= tol:
        raise ValueError(f"{what} is off the manifold: ||X'X - I|| = {v:.3e} > {tol:.1e}")


def spectral_norm(A: np.ndarray, tol: float = 1e-8, max_iter: int | None = None) -> float:
    """Largest singular value of A by power iteration on the Gram operator.

    Iterates y = A'(A x) so convergence only needs a gap in sigma^2, which
    sidesteps the +/- eigenvalue pairings common in the test problems (for
    eta = 1 every eigenvalue of the symmetric factor has unit magnitude and
    plain power iteration on A never settles).  Starts from a fixed
    deterministic vector; raises PowerIterationStalled past the cap.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    if max_iter is None:
        max_iter = 10 * n
    x = np.cos(np.arange(1, n + 1, dtype=float))  # deterministic, no zero pattern
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(max_iter):
        y = A.T @ (A @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        est = np.sqrt(ny)
        if abs(est - prev) <= tol * max(est, 1.0):
            return float(est)
        prev = est
    raise PowerIterationStalled(
        f"power iteration did not reach rel tol {tol:.1e} in {max_iter} iterations"
    )
