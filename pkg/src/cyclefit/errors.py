"""Exception hierarchy shared across the package.

``DataError`` covers everything wrong with user-supplied input (bad CSV,
impossible bounds, filters that empty the dataset); ``ModelError`` covers
failures of the statistical machinery on otherwise valid data. The CLI maps
``DataError``/``PreconditionError`` to exit code 2 and anything else to 1; the
HTTP service maps them to 4xx responses.
"""

from __future__ import annotations


class CycleFitError(Exception):
    """Base class for all package errors."""

    code = "error"


class DataError(CycleFitError):
    code = "data_error"


class ParseError(DataError):
    """Malformed cell in an input table; ``row`` is the 1-based file line."""

    code = "parse_error"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class EmptyInput(DataError):
    code = "empty_input"


class MissingColumn(DataError):
    code = "missing_column"


class AmbiguousColumns(DataError):
    code = "ambiguous_columns"


class InvalidBounds(DataError):
    code = "invalid_bounds"


class ZeroUserMean(DataError):
    code = "zero_user_mean"

    def __init__(self, user_id: str):
        super().__init__(f"user {user_id!r} has zero mean outcome; cannot normalise")
        self.user_id = user_id


class PreconditionError(DataError):
    """An analysis option is outside its documented range."""

    code = "precondition_failed"


class ModelError(CycleFitError):
    code = "model_error"


class TooFewObservations(ModelError):
    code = "too_few_observations"


class RankDeficient(ModelError):
    code = "rank_deficient"


class InsufficientUsers(ModelError):
    code = "insufficient_users"


class AllResamplesFailed(ModelError):
    code = "all_resamples_failed"


class FlatCurve(ModelError):
    code = "flat_curve"


class SegmentTooShort(ModelError):
    code = "segment_too_short"


class ZeroVariance(ModelError):
    code = "zero_variance"

    def __init__(self, name: str):
        super().__init__(f"covariate {name!r} is constant across users")
        self.name = name


class NoMatchedUsers(ModelError):
    code = "no_matched_users"


class TooFewDistinctValues(ModelError):
    code = "too_few_distinct_values"
