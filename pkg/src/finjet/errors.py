"""Exception hierarchy shared by every finjet module."""


class FinjetError(Exception):
    """Base class for all engine errors."""


class NumericDomainError(FinjetError, ArithmeticError):
    """A primitive was evaluated outside its analytic domain."""


class OrderExceededError(FinjetError, IndexError):
    """A derivative beyond the truncation order of a jet was requested."""


class ParseError(FinjetError, ValueError):
    """Malformed coefficient expression.

    ``offset`` is the byte offset of the offending token in the source text.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class ModelInvalidError(FinjetError, ValueError):
    """A Finsler model or metric violates its defining conditions."""

    def __init__(self, message, point=None):
        if point is not None:
            message = f"{message} at point {point}"
        super().__init__(message)
        self.point = point


class PreconditionError(FinjetError, ValueError):
    """An operation was called outside its documented preconditions."""


class DomainError(FinjetError, ValueError):
    """A point lies outside the configured domain of a diffeomorphism."""


class ResonantWeightError(FinjetError, ValueError):
    """The density weights hit an excluded (resonant) value."""


class DimensionError(FinjetError, ValueError):
    """The dimension is outside the supported range of an operation."""
