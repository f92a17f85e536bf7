"""Exception types shared across the package.

The CLI maps each family onto a process exit code, so callers should raise
these rather than bare ``ValueError`` when the failure is user-facing.
"""


class TrapNLSError(Exception):
    """Base class for all package errors."""


class ValidationError(TrapNLSError, ValueError):
    """A precondition on inputs or configuration does not hold."""


class NumericalAbort(TrapNLSError, ArithmeticError):
    """An evolution produced non-finite values."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class CacheFormatError(TrapNLSError, IOError):
    """A binary cache or snapshot file has a bad magic, version or layout."""


class AliasingError(ValidationError):
    """The requested Sobolev order exceeds what the discretisation resolves."""
