"""Exception hierarchy shared across the package."""


class PcevalError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(PcevalError, ValueError):
    """An operation was called with arguments outside its domain."""


class DegenerateNeighborhoodError(PcevalError, ValueError):
    """A neighborhood is too small for plane fitting (< 3 points)."""


class SolverFailureError(PcevalError, RuntimeError):
    """An assignment solver failed to converge; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ParseError(PcevalError, ValueError):
    """A cloud/manifest/report file is malformed.

    Carries the file path plus a line number (text formats) or byte
    offset (binary formats) locating the problem.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        loc = ""
        if line is not None:
            loc = f" (line {line})"
        elif offset is not None:
            loc = f" (byte offset {offset})"
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{message}{loc}")
        self.path = path
        self.line = line
        self.offset = offset


class DataIOError(PcevalError, OSError):
    """Reading or writing a data file failed at the OS level."""
