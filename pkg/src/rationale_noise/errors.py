from __future__ import annotations


class ValidationError(ValueError):
    """Invalid parameters, configuration or input records."""


class DataError(ValidationError):
    """A corpus file violates the JSONL record schema."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class SingularityError(ValidationError):
    """Regression design (or covariance matrix) is not invertible."""
