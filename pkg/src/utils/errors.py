"""
Error Types
Exception hierarchy shared by the library and the command line.

Each error carries the process exit code the CLI reports for it:
2 for usage/validation problems, 3 for data/parse problems and
4 for numerical failures.
"""

from typing import Optional

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_INTERRUPTED = 130


class NetworkEffectsError(Exception):
    """Base class for all errors raised by netinterf"""

    exit_code = EXIT_UNEXPECTED


class ValidationError(NetworkEffectsError, ValueError):
    """Invalid parameter or argument combination"""

    exit_code = EXIT_USAGE


class UnsupportedError(ValidationError):
    """Valid request for a variant that is not implemented (e.g. dim > 1 lattices)"""


class DataError(NetworkEffectsError, ValueError):
    """Malformed input data; message carries the record or line number when known"""

    exit_code = EXIT_DATA

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(NetworkEffectsError, ArithmeticError):
    """A computation could not be carried out on otherwise valid input"""

    exit_code = EXIT_NUMERICAL


class RankDeficientError(NumericalError):
    """Not enough residual degrees of freedom"""


class NotPositiveDefiniteError(NumericalError):
    """A covariance matrix that must be positive definite is not"""


class InfeasibleThetaError(NumericalError):
    """No theta makes I + theta*G positive definite"""


class LeverageError(NumericalError):
    """A unit has leverage 1, so leverage-adjusted sandwich weights are undefined"""

    def __init__(self, unit: int, kind: str):
        super().__init__(f"unit {unit} has leverage 1; {kind} covariance is undefined")
        self.unit = unit


class DegenerateLikelihoodError(NumericalError):
    """Gaussian likelihood is unbounded (zero residual variance)"""
