"""Exception hierarchy shared across the harness."""

from __future__ import annotations


class ClaimBenchError(Exception):
    """Base class for every error raised by claimbench."""


class ConfigError(ClaimBenchError):
    """Invalid configuration, missing path or inconsistent options."""


class DataError(ClaimBenchError):
    """Input data that cannot be used as-is."""


class StructuralError(DataError, ValueError):
    """A string that cannot be read as a code of the requested kind."""


class FormatError(DataError):
    """A malformed line in a line-oriented input file."""

    def __init__(self, message: str, line: int | None = None, text: str | None = None):
        self.line = line
        self.text = text
        where = f"line {line}: " if line is not None else ""
        suffix = f" ({text!r})" if text is not None else ""
        super().__init__(f"{where}{message}{suffix}")


class SchemaError(FormatError):
    """A corpus record that does not follow the JSONL schema."""


class DuplicateIdError(DataError):
    pass


class EmptyCohortError(DataError, ValueError):
    pass


class DimensionMismatch(DataError, ValueError):
    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class EmptyIndexError(DataError, ValueError):
    pass


class KTooLargeError(DataError, ValueError):
    pass


class MissingContextError(ClaimBenchError, ValueError):
    """A RAG prompt was requested without exactly k retrieved examples."""


class EndpointError(ClaimBenchError):
    """Base class for failures talking to a model service."""

    kind = "endpoint"


class TransportError(EndpointError):
    kind = "transport"


class EndpointTimeout(EndpointError):
    kind = "timeout"


class AuthRejected(EndpointError):
    kind = "auth_rejected"


class NonRetryableStatus(EndpointError):
    kind = "non_retryable_status"

    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)
