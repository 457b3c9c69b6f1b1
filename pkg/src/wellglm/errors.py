"""Exception hierarchy shared by every module.

Each leaf class belongs to one of three families that the CLI maps onto
exit codes: configuration (2), data (3) and numerical (4).
"""

from __future__ import annotations


class WellGLMError(Exception):
    """Base class for all package errors."""

    code = "ERROR"
    exit_code = 1


class ConfigError(WellGLMError):
    code = "CONFIG_ERROR"
    exit_code = 2


class DataError(WellGLMError):
    code = "DATA_ERROR"
    exit_code = 3


class NumericalError(WellGLMError):
    code = "NUMERICAL_ERROR"
    exit_code = 4


class SchemaError(DataError):
    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class DuplicateRowError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class ShapeError(DataError):
    pass


class DomainError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class ValidationError(ParseError):
    pass


class DegenerateWeightsError(NumericalError):
    pass


class NotPositiveDefiniteError(NumericalError):
    pass


class DegenerateDesignError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class RankError(NumericalError):
    def __init__(self, message: str, columns: list[str] | None = None):
        super().__init__(message)
        self.columns = columns or []


class UndefinedVarianceError(NumericalError):
    pass


class DegenerateDistributionError(NumericalError):
    pass


class SimulationSpecError(ConfigError):
    pass
