"""Exception types mapped to CLI exit codes."""


class UsageError(Exception):
    """Bad command-line usage or configuration. Exit code 1."""


class DataError(Exception):
    """Unreadable or malformed input data. Exit code 2."""


class NumericalError(Exception):
    """Numerical failure during sampling or linear algebra. Exit code 3."""
