"""Exception types raised by the solver and diagnostics."""


class CHError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CHError, ValueError):
    """Malformed grid, array or measure."""


class InvalidParameterError(CHError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DomainCoverageError(CHError, ValueError):
    """The alpha grid does not cover the range of x + mu((-inf, x])."""


class CorruptedStateError(CHError, RuntimeError):
    """Particle positions lost monotonicity beyond rounding."""


class SchemeBlowUpError(CHError, ArithmeticError):
    """The time stepper produced non-finite values."""


class InvalidTestFunctionError(CHError, ValueError):
    """A weak-form test function is not supported inside the trajectory box."""


class OracleRangeError(CHError, RuntimeError):
    """The multipeakon oracle blew up before the requested stop time."""
