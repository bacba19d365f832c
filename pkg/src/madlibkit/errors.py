"""Exception types shared across the toolkit."""


class MadlibkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(MadlibkitError, ValueError):
    """Raised on non-finite values or out-of-range parameters."""


class ShapeError(MadlibkitError, ValueError):
    """Raised when array dimensions do not match a contract."""


class EmptyPoolError(MadlibkitError, ValueError):
    """Raised when pooling an empty sequence of vectors."""


class UnencodableAnswerError(MadlibkitError, ValueError):
    """Raised when no token of an answer is in the embedding vocabulary."""


class ZeroNormError(MadlibkitError, ValueError):
    """Raised when a cosine similarity input has zero norm."""


class NoDecisionError(MadlibkitError, RuntimeError):
    """Raised when every candidate of an instance is unencodable."""


class InsufficientSamplesError(MadlibkitError, ValueError):
    """Raised when fewer samples are available than a fit requires."""


class ParseError(MadlibkitError, ValueError):
    """Raised on malformed input files; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(MadlibkitError, ValueError):
    """Raised when referenced data (image features, models) is missing."""
