"""Exception hierarchy shared by the toolkit.

The CLI maps these onto its exit-code contract: ``ValidationError`` -> 1,
``MissingInputError`` -> 2, ``ProtocolViolation`` -> 3.
"""

from __future__ import annotations


class MacroCtxError(Exception):
    """Base class for every error raised by the toolkit."""


class ValidationError(MacroCtxError, ValueError):
    """Malformed input, violated precondition, or inconsistent data."""


class MissingInputError(MacroCtxError, FileNotFoundError):
    """A required input file does not exist."""

    def __init__(self, path, what: str = "input file"):
        self.path = str(path)
        super().__init__(f"missing {what}: {self.path}")


class ProtocolViolation(MacroCtxError):
    """The frozen train/OOD evaluation protocol would be broken."""


class ChecksumError(ValidationError):
    """A persisted artifact failed its integrity check."""


class FetchError(MacroCtxError):
    """Economic-data HTTP request failed.

    ``retryable`` is true for transport failures and HTTP 429/5xx.
    """

    def __init__(self, message: str, *, status: int | None = None, retryable: bool = False):
        super().__init__(message)
        self.status = status
        self.retryable = retryable
