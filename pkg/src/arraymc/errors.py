"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ArrayMCError(Exception):
    """Base class for user-facing errors."""


class SpecError(ArrayMCError):
    """Malformed system description; carries an optional source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + message)


class FunctionalFormError(SpecError):
    """A transition does not fit the guarded functional-update shape."""


class PartitionError(SpecError):
    """Case-function guards overlap or fail to cover all cases."""


class ConfigError(ArrayMCError):
    """Invalid run configuration (budgets, grid size, cover function)."""


class UnsupportedOperation(ArrayMCError):
    """Requested operation is not available for the given theory."""


class InternalError(Exception):
    """Violated internal precondition (a bug, not a user error)."""
