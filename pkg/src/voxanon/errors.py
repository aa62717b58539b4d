"""Exception types shared across the package."""


class ConfigError(Exception):
    """Raised when a run configuration is malformed or incomplete."""


class DataError(Exception):
    """Raised when an input file or data record cannot be used."""
