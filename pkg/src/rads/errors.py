"""Exception types shared across the toolkit."""


class RadsError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(RadsError, ValueError):
    """An argument violates a documented precondition."""


class ShapeError(ParameterError):
    """Array dimensions do not match what the operation requires."""


class LabelError(ParameterError):
    """A class label is outside the valid range."""


class NumericError(RadsError, ArithmeticError):
    """A computation produced a non-finite value."""


class ProtocolError(RadsError, RuntimeError):
    """An operation was called in an invalid sequence (e.g. stepping a finished episode)."""


class ValidationError(RadsError, ValueError):
    """Input data violates a file- or pool-level invariant.

    ``line`` is the 1-based line number for JSON-lines inputs, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
