"""Shared exception types."""


class ConfigurationError(Exception):
    """Invalid configuration: bad column names, bad parameter values, empty pools."""


class StreamParseError(Exception):
    """Malformed event-log input. Carries the offending 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericError(Exception):
    """Non-finite value produced inside the predictor."""
