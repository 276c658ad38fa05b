"""Exception hierarchy shared by every module."""


class AoiiError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class ValidationError(AoiiError, ValueError):
    code = "validation"


class NegativeEntry(ValidationError):
    code = "negative_entry"


class RowSumViolation(ValidationError):
    code = "row_sum_violation"


class NotStrictlySubstochastic(ValidationError):
    code = "not_strictly_substochastic"


class ArgumentOutOfRange(ValidationError):
    code = "argument_out_of_range"


class IsolatedState(ValidationError):
    code = "isolated_state"


class DegenerateState(ValidationError):
    code = "degenerate_state"


class InvalidPolicy(ValidationError):
    code = "invalid_policy"


class MinimumSampleSize(ValidationError):
    code = "minimum_sample_size"


class NumericalError(AoiiError, ArithmeticError):
    code = "numerical"


class SingularMatrix(NumericalError):
    code = "singular_matrix"


class SingularSystem(NumericalError):
    code = "singular_system"


class NotUnichain(NumericalError):
    code = "not_unichain"


class SearchSpaceTooLarge(AoiiError):
    code = "search_space_too_large"


class ConfigError(AoiiError):
    code = "config"


class BoundaryWarning(UserWarning):
    """An optimal threshold sits at the truncation limit of the action space."""
