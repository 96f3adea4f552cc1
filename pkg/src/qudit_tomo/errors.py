"""Exception hierarchy.

Errors split into two families so the CLI can map them to exit codes:
``ValidationError`` (bad input, exit 1) and ``NumericalError`` (a
well-formed problem that cannot be solved, exit 2).
"""


class TomographyError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TomographyError, ValueError):
    """Input failed validation. ``field`` names the offending item, if known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NumericalError(TomographyError, ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


# -- matrix ---------------------------------------------------------------
class NotHermitian(ValidationError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class Singular(NumericalError):
    pass


# -- generators -----------------------------------------------------------
class IndexOutOfRange(ValidationError, IndexError):
    pass


class InvalidPair(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


# -- states ---------------------------------------------------------------
class NotNormalized(ValidationError):
    pass


class NotPhysical(ValidationError):
    pass


class UnknownName(ValidationError, KeyError):
    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return str(self.args[0]) if self.args else ""


# -- measurement ----------------------------------------------------------
class WrongCount(ValidationError):
    pass


class BasisMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DegenerateSet(ValidationError):
    pass


class ZeroOverlap(ValidationError):
    pass


# -- reconstruction -------------------------------------------------------
class IncompleteSet(NumericalError):
    pass


class NegativeScale(NumericalError):
    pass


class NonConvergence(NumericalError):
    """MLE hit ``max_iter``; the unconverged result is attached as ``result``."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result
