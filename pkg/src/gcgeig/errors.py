"""Error types raised by the library and mapped to CLI exit codes."""


class GcgError(Exception):
    """Base class for all library errors."""


class InvalidMatrix(GcgError):
    """Matrix input is unusable: non-finite entries, not symmetric, not SPD."""


class InvalidShape(GcgError):
    """Dimension mismatch between operands."""


class InvalidRange(GcgError):
    """An index range (1-based, inclusive) is out of bounds or reversed."""


class NoConvergence(GcgError):
    """An iterative kernel failed to converge."""


class AllDependent(GcgError):
    """Every column of a block turned out linearly dependent."""


class ParseError(GcgError):
    """Malformed input file.  Carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class Unsupported(GcgError):
    """Well-formed input that the reader deliberately does not handle."""


class UnknownGenerator(GcgError):
    """Requested builtin problem generator does not exist."""


class IoError(GcgError):
    """File could not be read or written."""
