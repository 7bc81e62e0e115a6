"""Multipliers correction methods for optimization over the Stiefel manifold.

The solver alternates a feasible reduction step (gradient reflection,
gradient projection, or column-wise block coordinate descent) with a
proximal rotation correction computed from one small SVD, driving the
symmetry part of the KKT residual to zero while keeping every iterate
exactly feasible.
"""

from .correction import CorrectionConfig, CorrectionInfo, correct_once, correction_sweep, delta_schedule, rotation_optimality_gap
from .errors import (
    InstanceTooLarge,
    InvalidSpec,
    PowerIterationStalled,
    RankDeficient,
    SingleSolver,
    StepFailed,
    SubproblemFailed,
)
from .manifold import (
    FEAS_TOL,
    feasibility_violation,
    kkt_residual_norm,
    orthonormalize_qr,
    project_stiefel_polar,
    residual_c,
    spectral_norm,
    substationarity,
    symmetry_violation,
)
from .problems import (
    BrockettProblem,
    GenParams,
    ObjectiveModel,
    QuadraticProblem,
    default_params,
    default_params1,
    default_params2,
    gen_problem,
    gen_problem1,
    gen_problem2,
    instance_filename,
    read_instance,
    write_instance,
)
from .rng import RNG_ID, DeterministicRng
from .solver import (
    SolveConfig,
    SolveReport,
    default_solve_config,
    solve,
    solve_qr_baseline,
    write_trace_csv,
)
from .steps import StepConfig, sphere_quadratic_min, step_cbcd, step_gp, step_gr
from .verification import (
    NumericalGradientModel,
    OracleResult,
    audit_lemmas,
    brockett_oracle,
    complexity_bound_violations,
    eigen_oracle_quadratic,
    fd_gradient,
    run_battery,
)

__version__ = "0.1.0"

__all__ = [
    "BrockettProblem",
    "CorrectionConfig",
    "CorrectionInfo",
    "DeterministicRng",
    "FEAS_TOL",
    "GenParams",
    "InstanceTooLarge",
    "InvalidSpec",
    "NumericalGradientModel",
    "ObjectiveModel",
    "OracleResult",
    "PowerIterationStalled",
    "QuadraticProblem",
    "RNG_ID",
    "RankDeficient",
    "SingleSolver",
    "SolveConfig",
    "SolveReport",
    "StepConfig",
    "StepFailed",
    "SubproblemFailed",
    "audit_lemmas",
    "brockett_oracle",
    "complexity_bound_violations",
    "correct_once",
    "correction_sweep",
    "default_params",
    "default_params1",
    "default_params2",
    "default_solve_config",
    "delta_schedule",
    "eigen_oracle_quadratic",
    "fd_gradient",
    "feasibility_violation",
    "gen_problem",
    "gen_problem1",
    "gen_problem2",
    "instance_filename",
    "kkt_residual_norm",
    "orthonormalize_qr",
    "project_stiefel_polar",
    "read_instance",
    "residual_c",
    "rotation_optimality_gap",
    "run_battery",
    "solve",
    "solve_qr_baseline",
    "spectral_norm",
    "sphere_quadratic_min",
    "step_cbcd",
    "step_gp",
    "step_gr",
    "substationarity",
    "symmetry_violation",
    "write_instance",
    "write_trace_csv",
]
