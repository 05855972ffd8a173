"""Exception hierarchy.

Every error raised by the solver derives from :class:`QueueModelError`; the
CLI maps the three intermediate classes onto its exit codes.
"""


class QueueModelError(Exception):
    """Base class for all package errors."""


class InvalidModelError(QueueModelError, ValueError):
    """Input does not describe a valid arrival process or service policy."""


class UnstableSystemError(QueueModelError):
    """The queue has no stationary distribution (rho >= 1)."""


class NumericalError(QueueModelError, ArithmeticError):
    """A numerical step failed or produced an out-of-tolerance result."""


# arrival process
class GeneratorRowSumError(InvalidModelError):
    pass


class SignPatternError(InvalidModelError):
    pass


class ReducibleError(InvalidModelError):
    pass


class SingularSolveError(NumericalError):
    pass


# service laws
class InvalidSubGenerator(InvalidModelError):
    pass


class DegenerateApproximant(InvalidModelError):
    pass


class PoleEvaluation(NumericalError):
    pass


# kernel
class SingularDenominator(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class DegreeMismatch(NumericalError):
    pass


class RootCountError(NumericalError):
    """Wrong number of characteristic roots in the closed unit disk.

    ``unstable`` is set when the stability check explains the failure.
    """

    def __init__(self, message, unstable=False):
        super().__init__(message)
        self.unstable = unstable


# stationary solver / epochs
class NullSpaceDimensionError(NumericalError):
    pass


class NegativeSolutionError(NumericalError):
    pass


class ResidueInstability(NumericalError):
    pass


class NegativeProbabilityError(NumericalError):
    pass
