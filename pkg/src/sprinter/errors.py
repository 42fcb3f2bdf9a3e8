"""
Exception hierarchy. Every error carries the process exit code that the CLI
uses when it is not handled.
"""

__all__ = (
    "SprinterError",
    "UsageError",
    "CapacityError",
    "DataError",
    "InputError",
    "DomainError",
    "NumericalError",
    "MismatchError",
    "DimensionError",
)


class SprinterError(Exception):
    exit_code: int = 1


class UsageError(SprinterError):
    """
    Invalid arguments or flag combinations, missing input files.
    """

    exit_code = 2


class CapacityError(UsageError):
    """
    The request would materialize more than the configured capacity allows,
    e.g. all-pairs lasso above `p_cap`.
    """


class DataError(SprinterError):
    exit_code = 3


class InputError(DataError):
    """
    Non-finite values, ragged rows, unusable categories or degenerate folds.
    """


class DomainError(DataError):
    """
    A mean vector lies outside the family's mean domain.
    """


class NumericalError(SprinterError):
    """
    A numerical procedure failed in a way that cannot be flagged and
    returned, e.g. divergence of a population Newton solve.
    """

    exit_code = 4


class MismatchError(SprinterError):
    """
    Model and data disagree: family versus response, or shapes.
    """

    exit_code = 5


class DimensionError(MismatchError):
    pass
