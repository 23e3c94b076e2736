"""Exception hierarchy shared across the toolkit.

Two branches matter for the CLI exit-code contract: ``DataError`` covers
problems with user-supplied inputs (exit code 3), everything escaping that
is treated as an internal invariant violation (exit code 4).
"""


class GramscopeError(Exception):
    """Base class for all toolkit errors."""


class DataError(GramscopeError):
    """Input data violates a precondition or schema."""


class UnreadableFile(DataError):
    pass


class MalformedAge(DataError):
    pass


class MalformedRecord(DataError):
    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InvalidAnnotation(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class MissingClass(DataError):
    pass


class DegenerateData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class MisalignedItems(DataError):
    pass


class LengthMismatch(DataError):
    pass


class InsufficientData(DataError):
    pass


class TooFewGroups(DataError):
    pass


class SubsampleTooSmall(DataError):
    pass


class Separation(DataError):
    pass


class NonConvergence(GramscopeError):
    pass
