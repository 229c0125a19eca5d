"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad inputs
(CLI exit code 2) and :class:`NumericalToleranceError` for computations
that ran but could not meet a tolerance (CLI exit code 3).
"""


class BallisticLabError(Exception):
    """Base class for every error raised by this package."""

    category = "error"


class ValidationError(BallisticLabError, ValueError):
    category = "validation"


class NumericalToleranceError(BallisticLabError, ArithmeticError):
    category = "numerical"


class FiberDegeneracyError(NumericalToleranceError):
    """A fiber matrix has a repeated eigenvalue away from theta in {0, pi}."""


class UndefinedFiberError(ValidationError):
    """The velocity fiber is requested at theta in {0, pi}."""


class ResolutionError(ValidationError):
    """A theta grid is too coarse for the requested support."""


class OrderingError(NumericalToleranceError):
    """Bands overlap beyond tolerance."""


class WindowOverflowError(NumericalToleranceError):
    """An evolved state leaked too much mass into the window boundary."""
