"""Exception and warning types raised by the library.

Input-validation errors derive from :class:`InvalidInput` and map to CLI exit
code 2; every other :class:`CobosonError` is a domain/numerical failure and
maps to exit code 3.
"""

from __future__ import annotations


class CobosonError(ValueError):
    exit_code = 3


class InvalidInput(CobosonError):
    exit_code = 2


class EmptyInput(InvalidInput):
    pass


class NegativeCoefficient(InvalidInput):
    pass


class NotNormalized(InvalidInput):
    pass


class InvalidTriple(InvalidInput):
    pass


class InfeasiblePurity(CobosonError):
    pass


class MinusBranchInfeasible(CobosonError):
    pass


class Infeasible(CobosonError):
    pass


class InfeasibleN(CobosonError):
    pass


class InsufficientPowerSums(CobosonError):
    pass


class TooLarge(CobosonError):
    pass


class VanishingDenominator(CobosonError):
    pass


class PurityMismatch(CobosonError):
    pass


class ChainViolation(CobosonError):
    """A computed ratio escaped the bound chain; always indicates a bug."""


class GridMismatch(CobosonError):
    pass


class StabilityWarning(RuntimeWarning):
    pass


class OutsideConvergenceRadius(RuntimeWarning):
    pass


class NoConvergence(RuntimeWarning):
    pass
