"""Exception hierarchy shared by the solvers, the analysis pipeline and the CLI."""
from typing import Optional


class TopoMetaError(Exception):
    """Base class for all errors raised by this package."""


class IncompatibleEncodingError(TopoMetaError, ValueError):
    """Two solutions (or a solution and a problem) disagree on encoding or length."""


class ConfigurationError(TopoMetaError, ValueError):
    """A solver or experiment configuration violates its invariants."""


class InstanceFormatError(TopoMetaError):
    """A problem instance file is missing or cannot be parsed."""


class ArchiveFormatError(TopoMetaError):
    """An archive JSON-lines file contains a malformed record."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ComplexError(TopoMetaError, ValueError):
    """A simplicial complex or chain does not satisfy the required structure."""
