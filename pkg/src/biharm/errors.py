"""Exception hierarchy.

Two families matter to callers: ``PreconditionError`` (bad input, CLI exit
code 2) and ``NumericalFailure`` (the computation ran but could not deliver,
CLI exit code 3).
"""


class BiharmError(Exception):
    """Base class for all package errors."""


class PreconditionError(BiharmError, ValueError):
    pass


class NumericalFailure(BiharmError, RuntimeError):
    pass


# radial_ode
class NonPositiveU(PreconditionError):
    pass


class ZeroRadius(PreconditionError):
    pass


class TooFewSamples(PreconditionError):
    pass


class StepBudgetExceeded(NumericalFailure):
    pass


# shooting
class InvalidBracket(PreconditionError):
    pass


class NotGlobal(PreconditionError):
    pass


class NonMonotoneWitness(NumericalFailure):
    pass


class EmptyWindow(NumericalFailure):
    pass


# transforms
class NonPositiveL(PreconditionError):
    pass


class SOutOfRange(PreconditionError):
    pass


# asymptotics
class WrongRegime(PreconditionError):
    pass


class WindowTooSmall(PreconditionError):
    pass


# modes
class Resonance(PreconditionError):
    pass


class NonIntegrableForcing(PreconditionError):
    pass


class EmptyCoefficients(PreconditionError):
    pass


class ContainsK0(PreconditionError):
    pass
