"""Exception hierarchy shared by the library and the command-line runner.

Each error carries the process exit status the runner reports for it:
1 usage/parse, 2 validation, 3 runtime.
"""
from __future__ import annotations


class LgiError(Exception):
    exit_code = 3


class DimensionMismatch(LgiError, ValueError):
    exit_code = 2


class NotSquare(DimensionMismatch):
    pass


class NotHermitian(LgiError, ValueError):
    exit_code = 2


class NotPSD(LgiError, ValueError):
    exit_code = 2


class OutOfRange(LgiError, ValueError):
    exit_code = 2


class NotUnitVector(OutOfRange):
    pass


class DegenerateFilter(LgiError, ArithmeticError):
    """A filter success probability vanished, so the conditional statistics are undefined."""


class SignallingStatistics(LgiError):
    """The statistics violate no-signalling-in-time, so macrorealism cannot be decided."""


class NoFeasiblePoint(LgiError):
    pass


class NonUniformN(LgiError):
    pass


class ParseError(LgiError, ValueError):
    exit_code = 1


class ValidationError(LgiError, ValueError):
    exit_code = 2


class InvalidConfig(LgiError, ValueError):
    exit_code = 1
