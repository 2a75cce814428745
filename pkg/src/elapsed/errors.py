"""Exception hierarchy; the CLI maps these onto process exit codes."""


class ElapsedError(Exception):
    exit_code = 1


class ConfigError(ElapsedError, ValueError):
    """Invalid model parameters, grids or config documents."""
    exit_code = 2


class DomainError(ConfigError):
    """Evaluation outside the domain where the model is defined."""


class SolverError(ElapsedError, RuntimeError):
    """A fatal numerical failure (lost solvability, divergence, ...)."""
    exit_code = 3

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (t={time:.6g})"
        super().__init__(message)
        self.time = time


class LevelUnsolvable(SolverError):
    pass


class BranchLost(SolverError):
    pass


class AmbiguousBranch(SolverError):
    pass


class ContractionFailure(SolverError):
    pass


class RegionExit(SolverError):
    pass


class VerificationError(ElapsedError):
    exit_code = 4
