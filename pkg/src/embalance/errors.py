"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class EmbalanceError(Exception):
    exit_code = 1


class ConfigError(EmbalanceError, ValueError):
    """Invalid parameters or configuration."""

    exit_code = 2


class DataError(EmbalanceError, ValueError):
    """Malformed or invariant-violating data."""

    exit_code = 3


class NumericalError(EmbalanceError, ArithmeticError):
    """Non-finite values produced during optimization."""

    exit_code = 4
