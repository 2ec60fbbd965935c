"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data.

    ``line`` is the 1-based physical line of the offending CSV row when the
    error comes from a parser, otherwise ``None``.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    """Invalid run configuration."""


class DegenerateError(ArithmeticError):
    """A quantity is undefined for the given distribution (e.g. x_max == 0)."""
