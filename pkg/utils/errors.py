# utils/errors.py
"""Exception hierarchy shared by every package.

Each family maps onto one CLI exit code so agents never need to know which
module raised.
"""


class TransitError(Exception):
    """Base class for all errors raised by this project"""

    exit_code = 3


class ConfigError(TransitError, ValueError):
    """Invalid configuration or arguments"""

    exit_code = 1


class DataError(TransitError, ValueError):
    """Missing, unreadable or malformed input data"""

    exit_code = 2


class InvariantViolation(TransitError, AssertionError):
    """An internal invariant did not hold"""

    exit_code = 3


def exit_code_for(error: BaseException) -> int:
    """Map any exception onto the CLI exit-code convention"""
    if isinstance(error, TransitError):
        return error.exit_code
    if isinstance(error, OSError):
        return 2
    return 3
