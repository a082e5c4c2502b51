"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): guard/certificate
failures, where the inputs violate a checked hypothesis, and numerical
failures, where an algorithm did not converge.
"""


class DelayWaveError(Exception):
    """Base class for all package errors."""


class GuardError(DelayWaveError):
    """A hypothesis or certificate check failed (exit code 2 in the CLI)."""


class NumericalError(DelayWaveError):
    """An algorithm failed to reach its tolerance (exit code 3 in the CLI)."""


class DomainError(GuardError, ValueError):
    pass


class BoundaryRoot(GuardError):
    pass


class NonIntegerWinding(NumericalError):
    pass


class NewtonDivergence(NumericalError):
    pass


class StripEscape(NumericalError):
    pass


class DegenerateRoot(NumericalError):
    pass


class PoleOnContour(GuardError):
    pass


class TruncationFailure(NumericalError):
    pass


class MissingCertificate(GuardError):
    pass


class GridTooCoarse(GuardError):
    pass


class RangeViolation(GuardError):
    pass


class OrderingViolation(NumericalError):
    def __init__(self, msg, step=None, location=None):
        super().__init__(msg)
        self.step = step
        self.location = location


class NoConvergence(NumericalError):
    pass


class GuardViolation(GuardError):
    pass


class RootOrderViolation(GuardError):
    pass


class CFLViolation(GuardError):
    pass


class HistoryUnderflow(GuardError):
    pass


class NoFront(NumericalError):
    pass
