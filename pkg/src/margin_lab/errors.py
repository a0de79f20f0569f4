"""Exception hierarchy shared by every module.

The CLI maps ``ValidationError`` to exit code 2 and ``NumericalError`` to exit code 3.
"""


class MarginLabError(Exception):
    """Base class for all package errors."""


class ValidationError(MarginLabError, ValueError):
    """Input or configuration violates a documented precondition."""


class NumericalError(MarginLabError, ArithmeticError):
    """A computation could not be carried out reliably."""


class SingularMatrixError(NumericalError):
    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class DegeneratePerturbationError(NumericalError):
    pass


class NotSeparableError(NumericalError):
    pass


class DivergenceError(NumericalError):
    pass
