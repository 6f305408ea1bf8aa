"""Exception taxonomy shared across the package.

Everything raised on purpose derives from :class:`SrosiError` so callers can
catch one base class at the CLI boundary and map it to an exit code.
"""


class SrosiError(Exception):
    """Base class for all deliberate errors raised by this package."""


class InvalidParameter(SrosiError, ValueError):
    """A caller-supplied parameter is outside its documented domain.

    The message always names the offending parameter and, for schedule
    parameters, the specific inequality that failed.
    """


class NoMass(SrosiError, ArithmeticError):
    """A compactly supported kernel assigned zero mass to every sample.

    Raised instead of silently falling back to uniform weights; the caller
    must widen the bandwidth or switch kernels.
    """


class IterLimit(SrosiError, RuntimeError):
    """An iterative solver hit its iteration budget before certifying."""


class UnsupportedNorm(SrosiError, ValueError):
    """The requested norm has no exact LP representation in this module."""


class InnerInfeasible(SrosiError, RuntimeError):
    """A recourse stage has no feasible completion for the given outcome."""


class TooLarge(SrosiError, ValueError):
    """An exact enumeration was requested beyond its documented size cap."""


class SolveFailed(SrosiError, RuntimeError):
    """An LP backend returned a non-optimal status for a model that a
    higher-level routine required to be solved to optimality."""
