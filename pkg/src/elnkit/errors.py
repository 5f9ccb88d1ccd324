"""Exception hierarchy shared across the toolkit.

DataError and its subclasses map to CLI exit code 2, TransportError to 3.
"""

from __future__ import annotations


class ElnkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(ElnkitError):
    """Invalid input data: bad schema, bad values, malformed records."""


class SchemaError(DataError):
    """A record violates the line-delimited dataset schema."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        parts = [message]
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        super().__init__(": ".join(parts) if len(parts) > 1 else message)


class FormatError(DataError):
    """A binary artifact (weights, embedding archive) is corrupt or truncated."""


class DimensionError(DataError):
    """Vector or matrix dimensions do not line up."""


class TransportError(ElnkitError):
    """A remote service could not be reached or misbehaved."""

    def __init__(self, message: str, *, retries: int = 0):
        self.retries = retries
        super().__init__(f"{message} (after {retries} retries)" if retries else message)


class ProtocolError(TransportError):
    """A remote service answered with a malformed or inconsistent payload."""


class StageError(ElnkitError):
    """A pipeline stage failed; carries the stage name and offending record."""

    def __init__(self, stage: str, message: str, *, record_id: str | None = None):
        self.stage = stage
        self.record_id = record_id
        suffix = f" (record {record_id})" if record_id else ""
        super().__init__(f"stage '{stage}': {message}{suffix}")
