"""
Errors - Exception hierarchy shared by every stage of a run
"""

from typing import Optional

from config.settings import EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, EXIT_NUMERICAL_ERROR


class NcldError(Exception):
    """Base class for all errors raised by the engine"""

    exit_code = 1

    def __init__(self, message: str, chunk_index: Optional[int] = None, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.chunk_index = chunk_index
        self.stage = stage

    def __str__(self) -> str:
        where = []
        if self.chunk_index is not None:
            where.append(f"chunk {self.chunk_index}")
        if self.stage:
            where.append(f"stage {self.stage}")
        if where:
            return f"{self.message} ({', '.join(where)})"
        return self.message


class ConfigurationError(NcldError):
    """Invalid configuration or parameters that cannot describe a run"""

    exit_code = EXIT_CONFIG_ERROR


class DataError(NcldError):
    """Input data that cannot be used"""

    exit_code = EXIT_DATA_ERROR


class ParseError(DataError):
    """Malformed dataset file"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class LabelRangeError(DataError):
    """Label index outside [0, q)"""


class StateError(DataError):
    """Operation called on an object missing what it needs"""


class ShapeError(DataError, ValueError):
    """Matrix dimensions do not agree"""


class NumericalError(NcldError):
    """Factorization failure or non-finite values"""

    exit_code = EXIT_NUMERICAL_ERROR
