"""Exception types shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
NumericalError -> 3.
"""


class ShapeError(ValueError):
    """Raised by tensor primitives when operand shapes do not conform."""


class UsageError(Exception):
    """Bad command line arguments or config keys."""


class DataError(Exception):
    """Malformed or misaligned input data."""


class NumericalError(Exception):
    """Numerical failure (divergence, NaN loss, non-scalar loss)."""
