"""Exception hierarchy shared by every module.

The CLI maps ``InputError`` subclasses to exit code 2 and
``InvariantViolation`` subclasses to exit code 3.
"""

from __future__ import annotations


class HardcatchError(Exception):
    """Base class for all library errors."""


class InputError(HardcatchError):
    """Bad input: malformed records, unknown ids, missing configuration."""


class RecordError(InputError):
    """A record file could not be parsed. Carries file and line."""

    def __init__(self, path: str, line: int, message: str) -> None:
        self.path = path
        self.line = line
        self.message = message
        super().__init__(f"{path}:{line}: {message}")


class UnknownIdError(InputError, KeyError):
    """Lookup of a revision, test, mutant or (revision, test) pair failed."""

    def __str__(self) -> str:  # KeyError quotes its argument otherwise
        return str(self.args[0]) if self.args else "unknown id"


class DomainError(InputError, ValueError):
    """A precondition of an operation does not hold for the given input."""


class ConfigurationError(InputError):
    """Executor or scenario configuration is incomplete or invalid."""


class UndefinedMetricError(HardcatchError, ArithmeticError):
    """A rate was requested over an empty domain."""


class InvariantViolation(HardcatchError):
    """A structural invariant of the world does not hold."""


class CycleError(InvariantViolation):
    pass


class ConflictError(InvariantViolation):
    """Two ledger or outcome entries exist for the same (revision, test)."""


class MaterializationError(InputError):
    """A revision or mutant tree could not be written to a workspace."""
