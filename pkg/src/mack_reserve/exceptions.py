"""Exception hierarchy.

Errors split into input problems (bad files, bad parameters) and numeric
failures raised while sampling; the CLI maps the two groups onto different
exit codes.
"""


class MackReserveError(Exception):
    """Base class for all package errors."""


class InputError(MackReserveError, ValueError):
    """Invalid user input: malformed triangle, bad level, bad config."""


class NumericError(MackReserveError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""


class TriangleParseError(InputError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = ""
        if row is not None:
            where = f" (row {row + 1}" + (f", column {column + 1})" if column is not None else ")")
        super().__init__(message + where)


class NonPositiveCell(TriangleParseError):
    pass


class NonNumericCell(TriangleParseError):
    pass


class RaggedShapeMismatch(TriangleParseError):
    pass


class NonSquare(TriangleParseError):
    pass


class TriangleTooSmall(InputError):
    pass


class DiagonalMismatch(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class InvalidMoments(InputError):
    pass


class InvalidLevel(InputError):
    pass


class InsufficientReplications(InputError):
    pass


class EmptySample(InputError):
    pass


class SampleTooSmall(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class EmptyPool(NumericError):
    pass


class RejectionBudgetExceeded(NumericError):
    pass
