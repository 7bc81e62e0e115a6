"""Objective models and the two random test-problem families.

Problem 1 (quadratic):  f(X) = 1/2 tr(X'MX) + tr(N'X),  grad = MX + N,
with M = E Psi E' for orthogonal E and diagonal Psi with entries
+-eta^(1-i), and N = alpha Q D for unit-norm columns Q_i and
D_ii = zeta^(1-i).

Problem 2 (Brockett):  f(X) = 1/2 tr(D X'AX),  grad = A X D,
with A = E Psi E', Psi_ii = +-(eta^(1-i) + beta), and diagonal D with
entries +-alpha zeta^(1-i).

Instances are defined entirely by (family, parameters, seed) and are
regenerated from metadata; matrices are never serialized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InstanceTooLarge, InvalidSpec
from .manifold import orthonormalize_qr, spectral_norm
from .rng import RNG_ID, DeterministicRng

_SYM_TOL = 1e-14

# Generators build a dense n x n orthogonal factor; keep that desk-scale.
GEN_SIZE_CAP = 4000


class ObjectiveModel:
    """Interface the solver consumes.

    Subclasses provide eval_f / eval_grad plus the two scalars the method
    needs: rho_bound (spectral bound on the Hessian) and scale_s (estimate
    of the Hessian norm at 0, used for stepsize and gamma scaling).
    grad_norm_bound is an analytic bound on max ||grad f(X)||_2 over the
    manifold, used by the lemma auditors.
    """

    rho_bound: float
    scale_s: float

    def eval_f(self, X: np.ndarray) -> float:
        raise NotImplementedError

    def eval_grad(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval_f_grad(self, X: np.ndarray) -> tuple[float, np.ndarray]:
        return self.eval_f(X), self.eval_grad(X)

    def grad_norm_bound(self) -> float:
        raise NotImplementedError


class QuadraticProblem(ObjectiveModel):
    """f(X) = 1/2 tr(X'MX) + tr(N'X) with symmetric M."""

    def __init__(self, M: np.ndarray, N: np.ndarray):
        M = np.asarray(M, dtype=float)
        N = np.asarray(N, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("M must be square")
        if not np.abs(M - M.T).max() <= _SYM_TOL * max(1.0, np.abs(M).max()):
            raise ValueError("M must be symmetric to 1e-14")
        if N.shape[0] != M.shape[0]:
            raise ValueError("N row count must match M")
        self.M = M
        self.N = N
        self._norm_M = spectral_norm(M)
        self.rho_bound = self._norm_M
        self.scale_s = self._norm_M

    def eval_f(self, X: np.ndarray) -> float:
        return float(0.5 * np.vdot(X, self.M @ X) + np.vdot(self.N, X))

    def eval_grad(self, X: np.ndarray) -> np.ndarray:
        return self.M @ X + self.N

    def eval_f_grad(self, X: np.ndarray) -> tuple[float, np.ndarray]:
        G = self.M @ X + self.N
        # 1/2<X, MX> + <N, X> = 1/2<X, G> + 1/2<N, X>
        f = 0.5 * (np.vdot(X, G) + np.vdot(self.N, X))
        return float(f), G

    def grad_norm_bound(self) -> float:
        # ||MX + N||_2 <= ||MX||_F + ||N||_F <= ||M||_2 sqrt(p) + ||N||_F
        # for feasible X (||X||_F = sqrt(p)); dominates any iterate's value.
        p = self.N.shape[1] if self.N.ndim == 2 else 1
        return self._norm_M * np.sqrt(p) + float(np.linalg.norm(self.N))


class BrockettProblem(ObjectiveModel):
    """f(X) = 1/2 tr(D X'AX) with symmetric A and diagonal D (vector d)."""

    def __init__(self, A: np.ndarray, d: np.ndarray):
        A = np.asarray(A, dtype=float)
        d = np.asarray(d, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if not np.abs(A - A.T).max() <= _SYM_TOL * max(1.0, np.abs(A).max()):
            raise ValueError("A must be symmetric to 1e-14")
        self.A = A
        self.d = d
        self._norm_A = spectral_norm(A)
        self.rho_bound = self._norm_A * float(np.abs(d).max()) if d.size else 0.0
        self.scale_s = self.rho_bound

    def eval_f(self, X: np.ndarray) -> float:
        return float(0.5 * np.vdot(X, (self.A @ X) * self.d))

    def eval_grad(self, X: np.ndarray) -> np.ndarray:
        return (self.A @ X) * self.d

    def eval_f_grad(self, X: np.ndarray) -> tuple[float, np.ndarray]:
        G = (self.A @ X) * self.d
        return float(0.5 * np.vdot(X, G)), G

    def grad_norm_bound(self) -> float:
        return self.rho_bound * np.sqrt(self.d.size)


@dataclass
class GenParams:
    """Generator parameters; beta only enters family 2."""

    n: int
    p: int
    eta: float
    zeta: float
    alpha: float
    beta: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.p <= self.n):
            raise ValueError(f"need 0 < p <= n, got n={self.n}, p={self.p}")
        if self.eta < 1.0 or self.zeta < 1.0:
            raise ValueError("eta and zeta must be >= 1")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be > 0")
        if self.beta < 1.0:
            raise ValueError("beta must be >= 1")


def default_params1(n: int, p: int, seed: int = 0) -> GenParams:
    return GenParams(n=n, p=p, eta=1.01, zeta=1.01, alpha=1.0, seed=seed)


def default_params2(n: int, p: int, seed: int = 0) -> GenParams:
    return GenParams(n=n, p=p, eta=1.05, zeta=1.05, alpha=0.1, beta=2.0, seed=seed)


def default_params(family: int, n: int, p: int, seed: int = 0) -> GenParams:
    if family == 1:
        return default_params1(n, p, seed)
    if family == 2:
        return default_params2(n, p, seed)
    raise ValueError(f"unknown problem family {family}")


def _gen_common(params: GenParams, allow_large: bool) -> tuple[DeterministicRng, np.ndarray, np.ndarray]:
    """Shared head of both generators: E (orthonormalized n x n), then omega.

    Draw order is part of the instance format: E entries column-major, then
    the omega vector, then the family-specific tail (Q tilde or theta).
    """
    if params.n > GEN_SIZE_CAP and not allow_large:
        raise InstanceTooLarge(
            f"n={params.n} exceeds the generator cap {GEN_SIZE_CAP}; pass allow_large to override"
        )
    rng = DeterministicRng(params.seed)
    E = orthonormalize_qr(rng.gaussian_matrix(params.n, params.n))
    omega = rng.uniforms(params.n)
    return rng, E, omega


def gen_problem1(params: GenParams, allow_large: bool = False) -> QuadraticProblem:
    rng, E, omega = _gen_common(params, allow_large)
    i = np.arange(1, params.n + 1)
    psi = params.eta ** (1.0 - i)
    psi[omega >= 0.5] *= -1.0
    M = (E * psi) @ E.T
    M = 0.5 * (M + M.T)

    Qt = rng.gaussian_matrix(params.n, params.p)
    Q = Qt / np.linalg.norm(Qt, axis=0)
    j = np.arange(1, params.p + 1)
    N = params.alpha * Q * params.zeta ** (1.0 - j)
    return QuadraticProblem(M, N)


def gen_problem2(params: GenParams, allow_large: bool = False) -> BrockettProblem:
    rng, E, omega = _gen_common(params, allow_large)
    i = np.arange(1, params.n + 1)
    psi = params.eta ** (1.0 - i) + params.beta
    psi[omega >= 0.5] *= -1.0
    A = (E * psi) @ E.T
    A = 0.5 * (A + A.T)

    theta = rng.uniforms(params.p)
    j = np.arange(1, params.p + 1)
    d = params.alpha * params.zeta ** (1.0 - j)
    d[theta >= 0.5] *= -1.0
    return BrockettProblem(A, d)


def gen_problem(family: int, params: GenParams, allow_large: bool = False) -> ObjectiveModel:
    if family == 1:
        return gen_problem1(params, allow_large)
    if family == 2:
        return gen_problem2(params, allow_large)
    raise ValueError(f"unknown problem family {family}")


def instance_metadata(family: int, params: GenParams) -> dict:
    return {
        "family": family,
        "n": params.n,
        "p": params.p,
        "eta": params.eta,
        "zeta": params.zeta,
        "alpha": params.alpha,
        "beta": params.beta,
        "seed": params.seed,
        "rng": RNG_ID,
    }


def instance_filename(family: int, params: GenParams) -> str:
    return f"{family}_{params.n}_{params.p}_{params.seed}.json"


def write_instance(path: Path, family: int, params: GenParams) -> None:
    path.write_text(json.dumps(instance_metadata(family, params), indent=2) + "\n")


def read_instance(path: Path) -> tuple[int, GenParams]:
    """Parse instance metadata; raises InvalidSpec naming the bad field."""
    try:
        meta = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InvalidSpec(f"{path}: not valid JSON ({e})") from e
    for key in ("family", "n", "p", "eta", "zeta", "alpha", "seed"):
        if key not in meta:
            raise InvalidSpec(f"{path}: missing field '{key}'")
    if meta.get("rng", RNG_ID) != RNG_ID:
        raise InvalidSpec(f"{path}: field 'rng' is {meta['rng']!r}, expected {RNG_ID!r}")
    family = meta["family"]
    if family not in (1, 2):
        raise InvalidSpec(f"{path}: field 'family' must be 1 or 2, got {family!r}")
    try:
        params = GenParams(
            n=int(meta["n"]),
            p=int(meta["p"]),
            eta=float(meta["eta"]),
            zeta=float(meta["zeta"]),
            alpha=float(meta["alpha"]),
            beta=float(meta.get("beta", 2.0)),
            seed=int(meta["seed"]),
        )
    except (TypeError, ValueError) as e:
        raise InvalidSpec(f"{path}: bad generator parameters ({e})") from e
    return family, params
