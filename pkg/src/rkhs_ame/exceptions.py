"""Exception hierarchy.

The CLI maps each branch to its own exit status: configuration problems,
data problems and numerical failures.
"""


class RkhsAmeError(Exception):
    pass


class ConfigError(RkhsAmeError, ValueError):
    """Invalid user configuration (bad lambda, unknown column, ...)."""


class DataError(RkhsAmeError, ValueError):
    """Input data cannot support the requested computation."""


class InsufficientDataError(DataError):
    pass


class NumericError(RkhsAmeError, ArithmeticError):
    """A numerical routine failed or received unusable input."""


class InvalidInputError(NumericError, ValueError):
    pass


class DegenerateScaleError(NumericError, ValueError):
    """Column has no spread to standardize by."""


class CollinearityError(NumericError, ValueError):
    """Linear covariates (or their weighted cross-product) are rank deficient."""


class SelectionError(NumericError):
    """No grid point produced a finite cross-validation criterion."""
