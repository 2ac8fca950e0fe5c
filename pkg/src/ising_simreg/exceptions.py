"""
Custom exceptions for ising_simreg.

Two families map onto the CLI exit codes: InputError (2) for anything the
caller supplied wrongly, NumericalError (3) for failures of the numerics
themselves (non-convergence, singular matrices, enumeration limits).
"""

from typing import Any


class SimRegError(Exception):
    """
    Base exception for all library-level failures.

    Args:
        message (str): Short explanation of the error.
        details (Any | None): Optional structured details (offending index,
            file/row/column coordinates, condition numbers, ...).
    """

    exit_code = 1

    def __init__(self, message: str, details: Any | None = None):
        super().__init__(message)
        self.details = details


class InputError(SimRegError):
    exit_code = 2


class DimensionMismatchError(InputError):
    pass


class InvalidSimilarityError(InputError):
    pass


class DataFormatError(InputError):
    """Malformed input file. ``details`` holds ``file``, ``row`` and ``column``."""

    def __init__(
        self,
        message: str,
        file: str | None = None,
        row: int | None = None,
        column: str | None = None,
        details: Any | None = None,
    ):
        where = ", ".join(
            f"{key}={value}"
            for key, value in (("file", file), ("row", row), ("column", column))
            if value is not None
        )
        super().__init__(
            f"{message} ({where})" if where else message,
            details={"file": file, "row": row, "column": column, "extra": details},
        )
        self.file = file
        self.row = row
        self.column = column


class ConfigurationError(InputError):
    pass


class NumericalError(SimRegError):
    exit_code = 3


class EnumerationCapError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    pass


class SelectionError(NumericalError):
    pass
