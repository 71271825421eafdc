"""Exception hierarchy shared by all modules."""


class BinomialDIError(Exception):
    """Base class for errors raised by this package."""


class DomainError(BinomialDIError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class GeometryError(DomainError):
    """Channel geometry yields a capture probability that is not below 1."""


class ShapeError(BinomialDIError, ValueError):
    """Vectors that must have equal length do not."""


class SupportError(DomainError):
    """An observation lies outside the support of the channel law."""


class PreconditionError(BinomialDIError, ValueError):
    """A documented precondition of an operation is violated."""


class CodebookFormatError(BinomialDIError, ValueError):
    """A codebook file is malformed or violates a codebook invariant.

    ``invariant`` names the violated property so callers can report it.
    """

    def __init__(self, message, invariant="format"):
        super().__init__(message)
        self.invariant = invariant
