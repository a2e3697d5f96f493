"""Toolkit-wide exception types, mapped to CLI exit codes."""


class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


class NumericalError(RuntimeError):
    """Numerical failure such as training divergence (CLI exit code 4)."""
