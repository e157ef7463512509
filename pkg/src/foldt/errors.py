"""Exception hierarchy shared by the whole package."""


class FoldtError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(FoldtError):
    """Syntax or validation error in a text input, with source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" at line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(message + where)


class DataError(FoldtError):
    """Bad dataset, snapshot, or chunk-store contents."""


class QueryError(FoldtError):
    """Query evaluation failed for a reason other than logical failure."""


class BudgetExceededError(QueryError):
    """The resolution (or subsumption) step budget ran out.

    Distinct from logical failure: it usually signals runaway recursion
    in background rules or an adversarial subsumption instance.
    """


class ModelFormatError(FoldtError):
    """Model file cannot be read: wrong version, truncated, or inconsistent."""
