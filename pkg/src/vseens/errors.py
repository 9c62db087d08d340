"""Exception types shared across the package."""


class ConfigError(Exception):
    """Invalid configuration or input that makes an operation impossible."""


class ParseError(ConfigError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = path
        self.line_number = line_number
