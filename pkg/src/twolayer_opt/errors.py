"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Dimension mismatch between parameters, data, or vectors."""


class NumericsError(ArithmeticError):
    """Non-finite values where finite floats are required."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration (step sizes, policies)."""


class FormatError(ValueError):
    """Malformed persisted file. Carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class IoError(RuntimeError):
    """File could not be read or written."""
