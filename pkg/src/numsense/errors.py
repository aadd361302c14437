"""Exception types raised by numsense.

All of them derive from ``ValueError`` so callers that only care about
"bad input" can catch one thing.
"""


class NumsenseError(ValueError):
    pass


class ShapeMismatchError(NumsenseError):
    pass


class DomainError(NumsenseError):
    """An input lies outside the domain of the operation (log of <= 0, zero-norm row...)."""


class NonFiniteError(NumsenseError, ArithmeticError):
    pass


class NonScalarRootError(NumsenseError):
    pass


class NonDeterministicBuilderError(NumsenseError):
    pass


class OutOfRangeError(NumsenseError):
    pass


class BadArityError(NumsenseError):
    pass


class BatchTooSmallError(NumsenseError):
    pass


class ParseError(NumsenseError):
    """Malformed interchange file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(NumsenseError):
    pass


class EmptyDatasetError(NumsenseError):
    pass


class LengthMismatchError(NumsenseError):
    pass
