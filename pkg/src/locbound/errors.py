"""Exception hierarchy shared by every module."""

from __future__ import annotations


class LocboundError(Exception):
    """Base class for all errors raised by locbound."""


class DivisionByZeroProfile(LocboundError, ZeroDivisionError):
    """The decay profile evaluates to zero at a distance that is needed."""


class EmptySet(LocboundError, ValueError):
    pass


class DimensionCap(LocboundError, MemoryError):
    """The requested Hilbert space exceeds the configured dense cap."""


class DimensionMismatch(LocboundError, ValueError):
    pass


class SupportNotContained(LocboundError, ValueError):
    pass


class UnsupportedGeometry(LocboundError, ValueError):
    pass


class NotHermitian(LocboundError, ValueError):
    pass


class OverflowRisk(LocboundError, OverflowError):
    pass


class DegenerateNorm(LocboundError, ZeroDivisionError):
    """``||Phi||_a * C_a == 0``; use the small-coupling limit explicitly."""


class EnumerationCap(LocboundError, RuntimeError):
    pass


class RateZero(LocboundError, ValueError):
    pass


class NotProductState(LocboundError, ValueError):
    pass


class AllDegenerate(LocboundError, ValueError):
    pass


class BRange(LocboundError, ValueError):
    """Imaginary displacement outside ``0 <= b*gamma <= 2*mu*d``."""


class ConditionViolated(LocboundError, ValueError):
    pass


class QuadratureFailure(LocboundError, RuntimeError):
    pass


class DegenerateGround(LocboundError, ValueError):
    pass


class NormDrift(LocboundError, RuntimeError):
    pass


class OverlapTooLarge(LocboundError, ValueError):
    pass


class PreconditionError(LocboundError, ValueError):
    """A documented precondition of an operation does not hold."""


class BoundViolated(LocboundError, AssertionError):
    """An empirical quantity exceeded its analytic bound.

    The offending record is kept on ``report`` so callers can print it.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ParseError(LocboundError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        super().__init__(message)
        self.line = line
        self.field = field


class ConfigValidationError(LocboundError, ValueError):
    """One or more config fields are invalid; ``errors`` lists them."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


class IoError(LocboundError, OSError):
    """An output file could not be written."""
