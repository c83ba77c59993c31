"""Exception types shared across the package."""


class PgicError(Exception):
    """Base class for all errors raised by :mod:`pgic`."""


class InvalidChannel(PgicError, ValueError):
    """Channel gains violate the model assumptions."""


class ClassError(PgicError, ValueError):
    """Operation is undefined for this channel class."""


class DegenerateRegion(PgicError, ValueError):
    """The noisy-interference region has no finite triangle (coefficient condition fails)."""


class OutsideRegion(PgicError, ValueError):
    """A power pair lies outside the noisy-interference region."""


class LengthMismatch(PgicError, ValueError):
    """Allocation length does not match the number of sub-channels."""


class NotSymmetric(PgicError, ValueError):
    pass


class StrongInterference(PgicError, ValueError):
    pass


class PowerOutOfRange(PgicError, ValueError):
    pass


class NotInPowerRegion(PgicError):
    """The power budgets could not be certified to lie in the noisy-interference power region.

    This is a legitimate outcome, not a bug: the sum-rate capacity is simply
    not established for such budgets.
    """


class NumericalFailure(PgicError, RuntimeError):
    """A solver failed to converge or produced an allocation that fails validation."""


class Infeasible(PgicError, ValueError):
    """No genie parameters exist for the given optimum."""


class DomainError(PgicError, ValueError):
    pass


class AuditFailure(PgicError, AssertionError):
    pass


class GridTooLarge(PgicError, ValueError):
    pass
