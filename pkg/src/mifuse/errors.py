"""Exception hierarchy shared across the package.

The command-line tool maps these onto exit codes: ConfigError -> 2,
DataError -> 3, any other MiFuseError -> 4.
"""


class MiFuseError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(MiFuseError):
    """Invalid parameter value or unsatisfiable parameter combination."""


class DataError(MiFuseError):
    """Malformed, missing, or degenerate input data."""


class NumericalError(MiFuseError):
    """A numerical routine broke down (eigensolver failure, bad conditioning)."""


class ConvergenceError(NumericalError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class LeakageError(MiFuseError):
    """Train/test separation was violated inside the evaluation harness."""
