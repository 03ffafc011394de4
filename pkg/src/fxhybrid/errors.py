"""Exception hierarchy. CLI exit codes hang off these classes."""


class FxHybridError(Exception):
    exit_code = 1


class DataError(FxHybridError, ValueError):
    """Bad or insufficient input data."""

    exit_code = 2


class NumericError(FxHybridError, ArithmeticError):
    """Numerical failure: NaN loss, singular design matrix, non-finite values."""

    exit_code = 3


class SingularDesignError(NumericError):
    pass


class ConfigError(FxHybridError, ValueError):
    exit_code = 4


class WeightFileError(DataError):
    """Corrupt, truncated, or incompatible weight file."""
