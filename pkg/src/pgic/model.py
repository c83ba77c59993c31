"""Channel parameterization, classification and noisy-interference region membership.

Each sub-channel is a two-user Gaussian interference channel with unit-variance
noise at both receivers::

    Y1 = sqrt(c) X1 + sqrt(a) X2 + Z1
    Y2 = sqrt(d) X2 + sqrt(b) X1 + Z2

All gains are squared (power) gains.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

from .errors import ClassError, DegenerateRegion, InvalidChannel

__all__ = [
    "SubChannel",
    "ChannelClass",
    "PowerPair",
    "PgicInstance",
    "classify",
    "coefficient_condition",
    "in_noisy_region",
    "region_slack",
    "corner_points",
    "MEMBERSHIP_SLACK",
]

# absolute slack on the region inequality, absorbs round-off at the boundary
MEMBERSHIP_SLACK = 1e-12


class ChannelClass(enum.Enum):
    TWO_SIDED = "two-sided"
    ONE_SIDED_INTO_RX1 = "one-sided-rx1"  # a > 0, b = 0
    ONE_SIDED_INTO_RX2 = "one-sided-rx2"  # a = 0, b > 0
    INTERFERENCE_FREE = "interference-free"


class PowerPair(NamedTuple):
    """Powers of user 1 (``p``) and user 2 (``q``) on one sub-channel."""

    p: float
    q: float


@dataclass(frozen=True)
class SubChannel:
    """Squared gains of one sub-channel.

    ``a`` is the cross gain into receiver 1, ``b`` the cross gain into
    receiver 2, ``c`` and ``d`` the direct gains of links 1 and 2.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InvalidChannel(f"gain {name} must be a real number, got {v!r}")
            if not math.isfinite(v):
                raise InvalidChannel(f"gain {name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.a < 0 or self.b < 0:
            raise InvalidChannel(f"cross gains must be non-negative (a={self.a}, b={self.b})")
        if self.c <= 0 or self.d <= 0:
            raise InvalidChannel(f"direct gains must be positive (c={self.c}, d={self.d})")
        if not (self.a < self.d and self.b < self.c):
            raise InvalidChannel(
                f"model requires a < d and b < c (a={self.a}, b={self.b}, c={self.c}, d={self.d})"
            )

    @property
    def is_symmetric(self) -> bool:
        return self.a == self.b and self.c == self.d


@dataclass(frozen=True)
class PgicInstance:
    """A parallel Gaussian interference channel with total power budgets."""

    channels: Tuple[SubChannel, ...]
    total_p: float
    total_q: float

    def __post_init__(self) -> None:
        chans = tuple(self.channels)
        if not chans:
            raise InvalidChannel("an instance needs at least one sub-channel")
        for ch in chans:
            if not isinstance(ch, SubChannel):
                raise InvalidChannel(f"expected SubChannel, got {type(ch).__name__}")
        object.__setattr__(self, "channels", chans)
        for name in ("total_p", "total_q"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidChannel(f"{name} must be a finite real number, got {v!r}")
            if v < 0:
                raise InvalidChannel(f"{name} must be non-negative, got {v}")
            object.__setattr__(self, name, float(v))

    @property
    def m(self) -> int:
        return len(self.channels)


def classify(ch: SubChannel) -> ChannelClass:
    """Class of ``ch`` from the zero pattern of its cross gains (exact zero test)."""
    if ch.a > 0 and ch.b > 0:
        return ChannelClass.TWO_SIDED
    if ch.a > 0:
        return ChannelClass.ONE_SIDED_INTO_RX1
    if ch.b > 0:
        return ChannelClass.ONE_SIDED_INTO_RX2
    return ChannelClass.INTERFERENCE_FREE


def coefficient_condition(ch: SubChannel) -> bool:
    """True iff sqrt(ac) + sqrt(bd) < sqrt(cd) (strict)."""
    return math.sqrt(ch.a * ch.c) + math.sqrt(ch.b * ch.d) < math.sqrt(ch.c * ch.d)


def region_slack(ch: SubChannel, p: float, q: float) -> float:
    """sqrt(cd) - sqrt(ac)(1+bp) - sqrt(bd)(1+aq); non-negative inside the region."""
    return (
        math.sqrt(ch.c * ch.d)
        - math.sqrt(ch.a * ch.c) * (1.0 + ch.b * p)
        - math.sqrt(ch.b * ch.d) * (1.0 + ch.a * q)
    )


def in_noisy_region(ch: SubChannel, pp: Sequence[float]) -> bool:
    p, q = pp
    if p < 0 or q < 0:
        return False
    return region_slack(ch, p, q) >= -MEMBERSHIP_SLACK


def corner_points(ch: SubChannel) -> Tuple[PowerPair, PowerPair]:
    """Corners ``S = (0, q_s)`` and ``T = (p_t, 0)`` of the triangular region.

    Raises
    ------
    ClassError
        If a cross gain is zero: the region is then the whole quadrant.
    DegenerateRegion
        If the coefficient condition fails and the triangle collapses.
    """
    if classify(ch) is not ChannelClass.TWO_SIDED:
        raise ClassError("corner points exist only for two-sided channels")
    if not coefficient_condition(ch):
        raise DegenerateRegion("sqrt(ac) + sqrt(bd) >= sqrt(cd): region is degenerate")
    sac = math.sqrt(ch.a * ch.c)
    sbd = math.sqrt(ch.b * ch.d)
    gap = math.sqrt(ch.c * ch.d) - sac - sbd
    return PowerPair(0.0, gap / (ch.a * sbd)), PowerPair(gap / (ch.b * sac), 0.0)

