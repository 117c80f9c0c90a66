from typing import List, Optional


class ConfigError(ValueError):
    """Invalid user input: flags, JSON documents, missing blocks. Exit code 2."""
    exit_code = 2


class DataError(ConfigError):
    """Malformed or inconsistent tabular input."""


class ModelingError(RuntimeError):
    """A fit could not produce a valid solution. Exit code 1."""
    exit_code = 1


class ConvergenceError(ModelingError):
    def __init__(self, message: str, lam: Optional[float] = None,
                 iterations: Optional[int] = None):
        super().__init__(message)
        self.lam = lam
        self.iterations = iterations


class SeparationError(ModelingError):
    pass


class RankDeficientError(ModelingError):
    def __init__(self, message: str, columns: List[str]):
        super().__init__(message)
        self.columns = list(columns)


class ScreeningError(ModelingError):
    def __init__(self, message: str, pair: Optional[tuple] = None):
        super().__init__(message)
        self.pair = pair


class StageError(ModelingError):
    """Failure inside a pipeline stage; keeps the stage label and the cause's exit code."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', ModelingError.exit_code)
