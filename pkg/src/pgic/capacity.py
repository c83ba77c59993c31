"""Treat-interference-as-noise (TIN) sum rates, in nats.

On the noisy-interference region the TIN sum rate equals the sub-channel
sum-rate capacity; elsewhere it is only an achievable rate.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

from .errors import LengthMismatch
from .model import PgicInstance, SubChannel

__all__ = ["tin_rate", "total_tin_rate", "tin_gradient", "tin_hessian", "nats_to_bits"]


def tin_rate(ch: SubChannel, pp: Sequence[float]) -> float:
    """Sum rate 0.5*ln(1 + cp/(1+aq)) + 0.5*ln(1 + dq/(1+bp))."""
    p, q = pp
    return 0.5 * (
        math.log1p(ch.c * p / (1.0 + ch.a * q)) + math.log1p(ch.d * q / (1.0 + ch.b * p))
    )


def total_tin_rate(inst: PgicInstance, alloc: Sequence[Sequence[float]]) -> float:
    if len(alloc) != inst.m:
        raise LengthMismatch(f"expected {inst.m} power pairs, got {len(alloc)}")
    return math.fsum(tin_rate(ch, pp) for ch, pp in zip(inst.channels, alloc))


def tin_gradient(ch: SubChannel, p: float, q: float) -> Tuple[float, float]:
    a, b, c, d = ch.a, ch.b, ch.c, ch.d
    u = 1.0 + c * p + a * q
    v = 1.0 + b * p + d * q
    kp = 0.5 * (c / u + b / v - b / (1.0 + b * p))
    kq = 0.5 * (a / u + d / v - a / (1.0 + a * q))
    return kp, kq


def tin_hessian(ch: SubChannel, p: float, q: float) -> Tuple[float, float, float]:
    """Second derivatives ``(h_pp, h_pq, h_qq)`` of the TIN sum rate."""
    a, b, c, d = ch.a, ch.b, ch.c, ch.d
    u2 = (1.0 + c * p + a * q) ** 2
    v2 = (1.0 + b * p + d * q) ** 2
    s2 = (1.0 + a * q) ** 2
    t2 = (1.0 + b * p) ** 2
    hpp = 0.5 * (-c * c / u2 - b * b / v2 + b * b / t2)
    hpq = 0.5 * (-a * c / u2 - b * d / v2)
    hqq = 0.5 * (-a * a / u2 - d * d / v2 + a * a / s2)
    return hpp, hpq, hqq


def nats_to_bits(x: float) -> float:
    return x / math.log(2.0)
