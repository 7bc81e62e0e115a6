"""Exception types shared across the package."""


class RankDeficient(ValueError):
    """Input matrix is numerically rank deficient where full column rank is required."""


class PowerIterationStalled(RuntimeError):
    """Power iteration hit its iteration cap before reaching the requested tolerance."""


class SubproblemFailed(RuntimeError):
    """A sphere-constrained column subproblem solve did not converge."""


class StepFailed(RuntimeError):
    """A reduction step could not produce a feasible point after all retries."""


class InstanceTooLarge(ValueError):
    """Requested problem size exceeds a hard cap (enumeration or generator guard)."""


class InvalidSpec(ValueError):
    """Experiment spec file is malformed; message carries field diagnostics."""


class SingleSolver(ValueError):
    """Performance profiles need results from at least two solvers."""
