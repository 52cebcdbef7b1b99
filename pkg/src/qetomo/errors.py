"""Exception types raised by the library."""


class TomographyError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(TomographyError, ValueError):
    """An argument is outside the domain of the operation."""


class AmbiguityError(TomographyError):
    """Several distinct reconstructions explain the data equally well.

    ``candidates`` holds the tied estimates as ``UnitaryParams``.
    """

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)
