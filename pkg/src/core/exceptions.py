"""This module contains the exception hierarchy for the stabilizer toolkit."""

from typing import Optional


class StabilizerError(ValueError):
    """Base class for every error raised by the toolkit."""


class DimensionError(StabilizerError):
    """Operands have incompatible shapes."""


class DomainError(StabilizerError):
    """An operand lies outside the domain of the operation (e.g. not Hermitian PSD)."""


class PreconditionError(StabilizerError):
    """A documented precondition does not hold, e.g. the target is not invariant."""


class NumericalError(StabilizerError, ArithmeticError):
    """A computation produced non-finite values or lost too much accuracy."""


class HypothesisError(StabilizerError):
    """The inputs violate the hypotheses of a synthesis procedure."""


class ModelFileError(StabilizerError):
    """A model file could not be parsed or failed validation."""

    def __init__(self, message: str, field: str = "", line: Optional[int] = None, column: Optional[int] = None):
        location = field
        if line is not None:
            location = f"line {line}, column {column}" + (f" ({field})" if field else "")
        super().__init__(f"{location}: {message}" if location else message)
        self.field = field
        self.line = line
        self.column = column
