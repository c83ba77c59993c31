"""Subdifferential of the sub-channel capacity on the noisy-interference region, and its inverse.

On the region ``A`` the capacity equals the TIN rate.  A subgradient at a
point of ``A`` is:

* the gradient, for ``p > 0, q > 0`` (interior and slanted edge, region A1);
* a vertical ray ``k_p = K_p, k_q >= K_q`` on the ``q = 0`` edge (A2);
* a horizontal ray on the ``p = 0`` edge (A3);
* a quadrant ``k >= (c/2, d/2)`` at the origin (A4).

The rays and the quadrant extend to infinity; no upper caps are imposed.

Inversion works through the Lagrangian ``g(x) = C(x) - k.x``: ``k`` lies in
the subdifferential at ``x`` exactly when ``x`` maximizes ``g`` over ``A`` with
a zero multiplier on the slanted edge.  :func:`best_response` returns that
maximizer together with the edge multiplier; :func:`invert` keeps it only
when the multiplier vanishes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .capacity import tin_gradient, tin_hessian, tin_rate
from .errors import NumericalFailure, OutsideRegion
from .model import (
    ChannelClass,
    PowerPair,
    SubChannel,
    classify,
    coefficient_condition,
    corner_points,
    in_noisy_region,
)

__all__ = [
    "Subgradient",
    "RegionLabel",
    "Point",
    "RayFixedKp",
    "RayFixedKq",
    "Quadrant",
    "SubdiffSet",
    "BestResponse",
    "label_of",
    "subdifferential",
    "best_response",
    "invert",
    "in_B",
    "response_jacobian",
    "corner_images",
    "b_boundary_curves",
]

# slanted-edge multiplier below this (relative to |k|) counts as zero
EDGE_MULTIPLIER_TOL = 1e-10
_NEWTON_MAX_ITER = 100
_FRACTION_TO_BOUNDARY = 0.995


class Subgradient(NamedTuple):
    k_p: float
    k_q: float


class RegionLabel(enum.Enum):
    A1 = 1  # p > 0, q > 0
    A2 = 2  # q = 0 edge
    A3 = 3  # p = 0 edge
    A4 = 4  # origin

    @property
    def b_region(self) -> str:
        return f"B{self.value}"

    @property
    def activity(self) -> Tuple[bool, bool]:
        """Whether user 1 and user 2 transmit on the sub-channel."""
        return {1: (True, True), 2: (True, False), 3: (False, True), 4: (False, False)}[self.value]


@dataclass(frozen=True)
class Point:
    k: Subgradient

    def contains(self, k: Sequence[float], tol: float = 1e-9) -> bool:
        return _close(k[0], self.k.k_p, tol) and _close(k[1], self.k.k_q, tol)

    def minimal(self) -> Subgradient:
        return self.k


@dataclass(frozen=True)
class RayFixedKp:
    k_p: float
    k_q_min: float

    def contains(self, k: Sequence[float], tol: float = 1e-9) -> bool:
        return _close(k[0], self.k_p, tol) and k[1] >= self.k_q_min - tol * max(1.0, abs(self.k_q_min))

    def minimal(self) -> Subgradient:
        return Subgradient(self.k_p, self.k_q_min)


@dataclass(frozen=True)
class RayFixedKq:
    k_p_min: float
    k_q: float

    def contains(self, k: Sequence[float], tol: float = 1e-9) -> bool:
        return _close(k[1], self.k_q, tol) and k[0] >= self.k_p_min - tol * max(1.0, abs(self.k_p_min))

    def minimal(self) -> Subgradient:
        return Subgradient(self.k_p_min, self.k_q)


@dataclass(frozen=True)
class Quadrant:
    k_p_min: float
    k_q_min: float

    def contains(self, k: Sequence[float], tol: float = 1e-9) -> bool:
        return (
            k[0] >= self.k_p_min - tol * max(1.0, self.k_p_min)
            and k[1] >= self.k_q_min - tol * max(1.0, self.k_q_min)
        )

    def minimal(self) -> Subgradient:
        return Subgradient(self.k_p_min, self.k_q_min)


SubdiffSet = Union[Point, RayFixedKp, RayFixedKq, Quadrant]


def _close(x: float, y: float, tol: float) -> bool:
    return abs(x - y) <= tol * max(1.0, abs(y))


def label_of(pp: Sequence[float]) -> RegionLabel:
    p, q = pp
    if p > 0 and q > 0:
        return RegionLabel.A1
    if p > 0:
        return RegionLabel.A2
    if q > 0:
        return RegionLabel.A3
    return RegionLabel.A4


def _ray_kq_min(ch: SubChannel, p: float) -> float:
    # one-sided derivative in q at (p, 0)
    return ch.d / (2.0 * (1.0 + ch.b * p)) - ch.a * ch.c * p / (2.0 * (1.0 + ch.c * p))


def _ray_kp_min(ch: SubChannel, q: float) -> float:
    return ch.c / (2.0 * (1.0 + ch.a * q)) - ch.b * ch.d * q / (2.0 * (1.0 + ch.d * q))


def subdifferential(ch: SubChannel, pp: Sequence[float]) -> SubdiffSet:
    """Structured subdifferential of the capacity at ``pp``.

    Raises
    ------
    OutsideRegion
        If ``pp`` is not in the noisy-interference region, where the
        capacity (and so its subdifferential) is unknown.
    """
    if not in_noisy_region(ch, pp):
        raise OutsideRegion(f"{tuple(pp)} is outside the noisy-interference region")
    p, q = float(pp[0]), float(pp[1])
    label = label_of((p, q))
    if label is RegionLabel.A1:
        return Point(Subgradient(*tin_gradient(ch, p, q)))
    if label is RegionLabel.A2:
        return RayFixedKp(ch.c / (2.0 * (1.0 + ch.c * p)), _ray_kq_min(ch, p))
    if label is RegionLabel.A3:
        return RayFixedKq(_ray_kp_min(ch, q), ch.d / (2.0 * (1.0 + ch.d * q)))
    return Quadrant(ch.c / 2.0, ch.d / 2.0)


class _Triangle(NamedTuple):
    s: PowerPair
    t: PowerPair
    n_p: float  # outward normal of the slanted edge
    n_q: float
    rhs: float  # region is n_p*p + n_q*q <= rhs


def _triangle(ch: SubChannel) -> Optional[_Triangle]:
    if classify(ch) is not ChannelClass.TWO_SIDED:
        return None
    s, t = corner_points(ch)
    sac = math.sqrt(ch.a * ch.c)
    sbd = math.sqrt(ch.b * ch.d)
    return _Triangle(s, t, ch.b * sac, ch.a * sbd, math.sqrt(ch.c * ch.d) - sac - sbd)


@dataclass(frozen=True)
class BestResponse:
    """Maximizer of ``C(x) - k.x`` over the noisy-interference region.

    ``edge_multiplier`` is the KKT multiplier of the slanted edge; it is
    zero exactly when ``k`` belongs to the subdifferential at ``pp``.
    ``kind`` is one of ``"origin"``, ``"p-axis"``, ``"q-axis"``,
    ``"interior"`` (includes slanted-edge points with zero multiplier),
    ``"edge"`` or ``"vertex"`` (slanted edge, positive multiplier).
    """

    pp: PowerPair
    label: RegionLabel
    edge_multiplier: float
    kind: str

    @property
    def in_subdifferential(self) -> bool:
        return self.kind not in ("edge", "vertex")


def best_response(ch: SubChannel, k: Sequence[float]) -> BestResponse:
    """Maximize ``C(x) - k.x`` over the region for a positive price vector ``k``.

    The origin and the two axis edges are resolved in closed form; the
    remaining cases go through a damped Newton iteration on the interior
    and, failing that, a one-dimensional search along the slanted edge.
    """
    kp, kq = float(k[0]), float(k[1])
    if not (kp > 0 and kq > 0):
        raise ValueError(f"price vector must be positive, got {(kp, kq)}")
    if classify(ch) is ChannelClass.TWO_SIDED and not coefficient_condition(ch):
        raise OutsideRegion("coefficient condition fails: region has no interior")
    c, d = ch.c, ch.d
    if kp >= c / 2.0 and kq >= d / 2.0:
        return BestResponse(PowerPair(0.0, 0.0), RegionLabel.A4, 0.0, "origin")
    if kp < c / 2.0:
        p = 1.0 / (2.0 * kp) - 1.0 / c
        if p > 0 and in_noisy_region(ch, (p, 0.0)) and kq >= _ray_kq_min(ch, p):
            return BestResponse(PowerPair(p, 0.0), RegionLabel.A2, 0.0, "p-axis")
    if kq < d / 2.0:
        q = 1.0 / (2.0 * kq) - 1.0 / d
        if q > 0 and in_noisy_region(ch, (0.0, q)) and kp >= _ray_kp_min(ch, q):
            return BestResponse(PowerPair(0.0, q), RegionLabel.A3, 0.0, "q-axis")

    tri = _triangle(ch)
    if classify(ch) is ChannelClass.INTERFERENCE_FREE:
        # decoupled single-user gradients; both axis cases failed so both powers are positive
        p = 1.0 / (2.0 * kp) - 1.0 / c
        q = 1.0 / (2.0 * kq) - 1.0 / d
        return BestResponse(PowerPair(p, q), RegionLabel.A1, 0.0, "interior")

    if kp < c / 2.0 and kq < d / 2.0:
        x = _interior_newton(ch, kp, kq, tri)
        if x is not None:
            return BestResponse(PowerPair(*x), RegionLabel.A1, 0.0, "interior")
    if tri is None:
        raise NumericalFailure(f"interior solve failed for one-sided channel {ch} at k={(kp, kq)}")

    x, mu, kkt, kind = _edge_search(ch, kp, kq, tri)
    if not kkt:
        raise NumericalFailure(f"no KKT point found for {ch} at k={(kp, kq)}")
    scale = 1.0 + kp + kq
    if mu * math.hypot(tri.n_p, tri.n_q) <= EDGE_MULTIPLIER_TOL * scale:
        # root lies on the slanted edge itself
        return BestResponse(PowerPair(*x), label_of(x), 0.0, "interior")
    return BestResponse(PowerPair(*x), label_of(x), mu, kind)


def _interior_newton(
    ch: SubChannel, kp: float, kq: float, tri: Optional[_Triangle]
) -> Optional[Tuple[float, float]]:
    c, d = ch.c, ch.d
    p = max(1.0 / (2.0 * kp) - 1.0 / c, 1e-12)
    q = max(1.0 / (2.0 * kq) - 1.0 / d, 1e-12)
    if tri is not None:
        lhs = tri.n_p * p + tri.n_q * q
        if lhs >= 0.5 * tri.rhs:
            shrink = 0.5 * tri.rhs / lhs
            p, q = p * shrink, q * shrink
    scale = max(1.0, c, d, ch.a, ch.b)
    tol = 16 * 2.2e-16 * scale

    def lagrangian(pp: float, qq: float) -> float:
        return tin_rate(ch, (pp, qq)) - kp * pp - kq * qq

    gp, gq = tin_gradient(ch, p, q)
    rp, rq = gp - kp, gq - kq
    res = max(abs(rp), abs(rq))
    for _ in range(_NEWTON_MAX_ITER):
        if res <= tol:
            return p, q
        hpp, hpq, hqq = tin_hessian(ch, p, q)
        det = hpp * hqq - hpq * hpq
        if hpp < 0 and det > 0:
            dp = -(hqq * rp - hpq * rq) / det
            dq = -(hpp * rq - hpq * rp) / det
        else:
            dp, dq = rp, rq
        # largest step keeping p >= 0, q >= 0 and the slanted constraint
        amax = math.inf
        if dp < 0:
            amax = min(amax, -p / dp)
        if dq < 0:
            amax = min(amax, -q / dq)
        if tri is not None:
            slope = tri.n_p * dp + tri.n_q * dq
            if slope > 0:
                amax = min(amax, max(tri.rhs - tri.n_p * p - tri.n_q * q, 0.0) / slope)
        alpha = 1.0 if amax > 1.0 else _FRACTION_TO_BOUNDARY * amax
        if alpha <= 0:
            return None
        g0 = lagrangian(p, q)
        slope0 = rp * dp + rq * dq
        accepted = False
        for _ in range(60):
            np_, nq_ = p + alpha * dp, q + alpha * dq
            ngp, ngq = tin_gradient(ch, np_, nq_)
            nrp, nrq = ngp - kp, ngq - kq
            nres = max(abs(nrp), abs(nrq))
            if lagrangian(np_, nq_) >= g0 + 1e-4 * alpha * slope0 or nres <= (1 - 1e-4 * alpha) * res:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        step = max(abs(np_ - p), abs(nq_ - q))
        p, q, rp, rq, res = np_, nq_, nrp, nrq, nres
        if step <= 1e-16 * (1.0 + abs(p) + abs(q)):
            break
    if res <= 1e-12 * scale and p > 0 and q > 0 and in_noisy_region(ch, (p, q)):
        return p, q
    return None


def _edge_search(ch: SubChannel, kp: float, kq: float, tri: _Triangle):
    """Maximize the Lagrangian along the slanted edge S->T and test the KKT conditions."""
    sp, sq = tri.s
    ep, eq = tri.t.p - sp, tri.t.q - sq

    def point(t: float) -> Tuple[float, float]:
        if t >= 1.0:
            return tri.t.p, 0.0
        if t <= 0.0:
            return 0.0, sq
        return sp + t * ep, sq + t * eq

    def dphi(t: float) -> float:
        gp, gq = tin_gradient(ch, *point(t))
        return (gp - kp) * ep + (gq - kq) * eq

    if dphi(0.0) <= 0:
        t = 0.0
    elif dphi(1.0) >= 0:
        t = 1.0
    else:
        t = brentq(dphi, 0.0, 1.0, xtol=1e-16, rtol=1e-15, maxiter=200)
    x = point(t)
    gp, gq = tin_gradient(ch, *x)
    rp, rq = gp - kp, gq - kq
    tol = 1e-9 * (1.0 + kp + kq)
    if t <= 0.0:
        mu = rq / tri.n_q
        other = mu * tri.n_p - rp  # multiplier of p >= 0
        return x, mu, mu >= -tol and other >= -tol, "vertex"
    if t >= 1.0:
        mu = rp / tri.n_p
        other = mu * tri.n_q - rq
        return x, mu, mu >= -tol and other >= -tol, "vertex"
    mu = (rp * tri.n_p + rq * tri.n_q) / (tri.n_p ** 2 + tri.n_q ** 2)
    return x, mu, mu >= -tol, "edge"


def invert(ch: SubChannel, k: Sequence[float]) -> Optional[Tuple[PowerPair, RegionLabel]]:
    """The unique ``(p, q)`` in the region whose subdifferential contains ``k``.

    Returns ``None`` when ``k`` is not in the image set ``B`` of the channel.
    """
    br = best_response(ch, k)
    if not br.in_subdifferential:
        return None
    return br.pp, br.label


def in_B(ch: SubChannel, k: Sequence[float]) -> bool:
    return invert(ch, k) is not None


def response_jacobian(ch: SubChannel, k: Sequence[float], br: BestResponse) -> Tuple[float, float, float]:
    """Derivative of the best response with respect to ``k`` as ``(j_pp, j_pq, j_qq)``.

    The matrix is symmetric negative semidefinite.
    """
    kp, kq = float(k[0]), float(k[1])
    if br.kind == "origin" or br.kind == "vertex":
        return 0.0, 0.0, 0.0
    if br.kind == "p-axis":
        return -1.0 / (2.0 * kp * kp), 0.0, 0.0
    if br.kind == "q-axis":
        return 0.0, 0.0, -1.0 / (2.0 * kq * kq)
    p, q = br.pp
    hpp, hpq, hqq = tin_hessian(ch, p, q)
    if br.kind == "interior":
        if classify(ch) is ChannelClass.INTERFERENCE_FREE:
            return 1.0 / hpp, 0.0, 1.0 / hqq
        det = hpp * hqq - hpq * hpq
        return hqq / det, -hpq / det, hpp / det
    tri = _triangle(ch)
    ep, eq = tri.t.p - tri.s.p, tri.t.q - tri.s.q
    curv = hpp * ep * ep + 2 * hpq * ep * eq + hqq * eq * eq
    return ep * ep / curv, ep * eq / curv, eq * eq / curv


def corner_images(ch: SubChannel) -> dict:
    """Minimal subgradients at the corners: ``O'`` (origin), ``S'`` and ``T'``."""
    s, t = corner_points(ch)
    return {
        "O": Subgradient(ch.c / 2.0, ch.d / 2.0),
        "S": subdifferential(ch, s).minimal(),
        "T": subdifferential(ch, t).minimal(),
    }


def b_boundary_curves(ch: SubChannel, n: int = 200) -> dict:
    """Curves ``O'T'``, ``O'S'`` and ``S'T'`` separating the pieces of ``B`` in k-space.

    ``O'T'`` is traced by the ray minima along the p-axis edge, ``O'S'`` by
    those along the q-axis edge, and ``S'T'`` by the gradient along the
    slanted edge.  Each entry is an ``(n, 2)`` array.
    """
    s, t = corner_points(ch)
    u = np.linspace(0.0, 1.0, n)
    ot = np.array([subdifferential(ch, (x * t.p, 0.0)).minimal() for x in u])
    os_ = np.array([subdifferential(ch, (0.0, x * s.q)).minimal() for x in u])
    st = np.array([tin_gradient(ch, x * t.p, (1.0 - x) * s.q) for x in u])
    return {"OT": ot, "OS": os_, "ST": st}
