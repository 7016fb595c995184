"""Exception hierarchy shared by every raterfit module."""


class RaterError(Exception):
    """Base class for all raterfit errors."""


class ParseError(RaterError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDataError(ParseError):
    pass


class DomainError(RaterError, ValueError):
    """A value is outside its allowed domain (negative count, non-simplex, ...)."""


class ShapeError(RaterError, ValueError):
    pass


class UnsupportedError(RaterError):
    """The operation is not defined for this data format, model or fit method."""


class NumericalError(RaterError, ArithmeticError):
    pass


class StateError(RaterError):
    """An object is not in the state the operation needs (e.g. a fit without draws)."""


class InitError(NumericalError):
    pass


class ArchiveError(RaterError):
    pass
