"""Optimal power allocation over parallel interference sub-channels.

An allocation is optimal, and achieves the sum-rate capacity, when one common
price vector ``k*`` lies in the subdifferential of every sub-channel at its
allocated pair and every pair lies in the noisy-interference region.  The
solvers here search for such a certificate and refuse to answer otherwise.

:func:`solve_symmetric` covers symmetric sub-channels with ``P = Q`` through a
scalar bisection.  :func:`solve_general` handles arbitrary budgets by
minimizing the dual function

    D(k) = sum_i max_{x in A_i} [C_i(x) - k.x] + k.(P, Q)

whose gradient is the budget residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.ndimage import distance_transform_edt
from scipy.optimize import brentq

from .capacity import tin_gradient, tin_rate, total_tin_rate
from .errors import (
    ClassError,
    NotInPowerRegion,
    NotSymmetric,
    NumericalFailure,
    PowerOutOfRange,
    StrongInterference,
)
from .model import (
    ChannelClass,
    PgicInstance,
    PowerPair,
    SubChannel,
    classify,
    coefficient_condition,
    corner_points,
    in_noisy_region,
)
from .subdiff import (
    BestResponse,
    RegionLabel,
    Subgradient,
    best_response,
    invert,
    label_of,
    response_jacobian,
    subdifferential,
)

__all__ = [
    "Allocation",
    "SymmetricProfile",
    "symmetric_profile",
    "symmetric_power",
    "symmetric_k_star",
    "single_channel_limit",
    "two_channel_p_bar",
    "solve_symmetric",
    "solve_general",
    "validate_allocation",
    "activity_table",
    "power_region_boundary",
    "enumerate_subregions",
    "ACTIVE_THRESHOLD",
]

ACTIVE_THRESHOLD = 1e-9
BUDGET_RTOL = 1e-9
CERTIFICATE_TOL = 1e-8
_DUAL_TOL = 1e-12
_DUAL_MAX_ITER = 200
_LAMBDA_FLOOR = 1e-14
_BRACKET_FLOOR = 1e-9


class _Unreachable(Exception):
    pass


@dataclass
class Allocation:
    pairs: List[PowerPair]
    certificate: Subgradient
    labels: List[RegionLabel]
    achieved_rate: float  # nats


# ---------------------------------------------------------------------------
# symmetric sub-channels


@dataclass
class SymmetricProfile:
    """Cutoff data for symmetric sub-channels.

    Attributes
    ----------
    w : list of float
        Per-channel threshold ``4a^2 / (sqrt(c) - sqrt(a))^2``, in input order.
    w_hat : float
        ``max(w)``; the smallest admissible total price.
    r : int
        Number of channels with ``c > w_hat`` (active at the largest budget).
    p_bar : float
        Largest per-user budget for which the optimum is certified.
    order : list of int
        Input indices sorted by ``c`` descending (stable).
    """

    w: List[float]
    w_hat: float
    r: int
    p_bar: float
    order: List[int] = field(default_factory=list)


def _check_symmetric(channels: Sequence[SubChannel], allow_limit: bool = False) -> None:
    if not channels:
        raise NotSymmetric("need at least one sub-channel")
    for i, ch in enumerate(channels):
        if not ch.is_symmetric:
            raise NotSymmetric(f"sub-channel {i} is not symmetric: {ch}")
        if ch.a <= 0:
            raise NotSymmetric(f"sub-channel {i} has no interference (a = 0)")
        ratio = ch.a / ch.c
        if ratio > 0.25 or (ratio == 0.25 and not allow_limit):
            raise StrongInterference(f"sub-channel {i} has a/c = {ch.a / ch.c:.6g} >= 1/4")


def symmetric_power(ch: SubChannel, k: float) -> float:
    """Equal power ``p = q`` at which the symmetric channel has total price ``k = k_p + k_q``.

    Zero for ``k >= c``.  Uses the cancellation-free form of the root.
    """
    a, c = ch.a, ch.c
    if k >= c:
        return 0.0
    return 2.0 * (c / k - 1.0) / (math.sqrt(c * c + 4.0 * a * c * (a + c) / k) + 2.0 * a + c)


def _threshold(ch: SubChannel) -> float:
    return 4.0 * ch.a ** 2 / (math.sqrt(ch.c) - math.sqrt(ch.a)) ** 2


def symmetric_profile(channels: Sequence[SubChannel], allow_limit: bool = False) -> SymmetricProfile:
    """Thresholds, cutoff and certified maximum budget of symmetric sub-channels.

    With ``allow_limit`` a channel at exactly ``a/c = 1/4`` is accepted and
    contributes its limiting threshold ``w = c``, which drives ``p_bar`` to 0.

    Raises
    ------
    NotSymmetric, StrongInterference
    """
    _check_symmetric(channels, allow_limit)
    w = [_threshold(ch) for ch in channels]
    w_hat = max(w)
    order = sorted(range(len(channels)), key=lambda i: -channels[i].c)
    # a channel with c == w_hat exactly gets zero power there, so the strict count is right
    r = sum(1 for ch in channels if ch.c > w_hat)
    p_bar = math.fsum(symmetric_power(ch, w_hat) for ch in channels)
    return SymmetricProfile(w=w, w_hat=w_hat, r=r, p_bar=p_bar, order=order)


def single_channel_limit(ch: SubChannel) -> float:
    """Largest equal power ``(sqrt(ac) - 2a) / (2a^2)`` keeping one symmetric channel noisy."""
    return (math.sqrt(ch.a * ch.c) - 2.0 * ch.a) / (2.0 * ch.a ** 2)


def two_channel_p_bar(a1: float, a2: float, c: float = 1.0) -> float:
    """``p_bar`` for two symmetric sub-channels with common direct gain ``c``; 0 at ``a/c = 1/4``."""
    return symmetric_profile([SubChannel(a1, a1, c, c), SubChannel(a2, a2, c, c)], allow_limit=True).p_bar


def symmetric_k_star(
    channels: Sequence[SubChannel],
    total: float,
    lo: Optional[float] = None,
    hi: Optional[float] = None,
) -> float:
    """Total price ``k*`` with ``sum_i P_i*(k*) = total``, bracketed in ``[lo, hi]``.

    The default bracket is ``[w_hat, max c]``; any bracket containing the
    root gives the same answer since the sum is strictly decreasing while
    positive.
    """
    prof = symmetric_profile(channels)
    c_max = max(ch.c for ch in channels)
    lo = prof.w_hat if lo is None else lo
    hi = c_max if hi is None else hi
    if total <= 0:
        return c_max
    if total > prof.p_bar * (1.0 + 1e-12):
        raise PowerOutOfRange(f"P = {total} exceeds the certified maximum {prof.p_bar}")
    if total >= prof.p_bar:
        return prof.w_hat

    def excess(k: float) -> float:
        return math.fsum(symmetric_power(ch, k) for ch in channels) - total

    return brentq(excess, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)


def solve_symmetric(channels: Sequence[SubChannel], total: float) -> Allocation:
    """Optimal allocation for symmetric sub-channels with equal budgets ``P = Q = total``.

    Raises
    ------
    PowerOutOfRange
        If ``total`` exceeds the certified maximum ``p_bar``.
    """
    if total < 0:
        raise PowerOutOfRange(f"power must be non-negative, got {total}")
    channels = list(channels)
    k = symmetric_k_star(channels, total)
    pw = [symmetric_power(ch, k) for ch in channels]
    if total > 0:
        # put the bisection's last-bit residual on the strongest active channel
        i = max(range(len(pw)), key=lambda j: pw[j])
        pw[i] += total - math.fsum(pw)
    pairs = [PowerPair(x, x) for x in pw]
    inst = PgicInstance(tuple(channels), float(total), float(total))
    alloc = Allocation(
        pairs=pairs,
        certificate=Subgradient(k / 2.0, k / 2.0),
        labels=[label_of(pp) for pp in pairs],
        achieved_rate=total_tin_rate(inst, pairs),
    )
    validate_allocation(inst, alloc)
    return alloc


# ---------------------------------------------------------------------------
# general solver


def validate_allocation(inst: PgicInstance, alloc: Allocation, tol: float = CERTIFICATE_TOL) -> None:
    """Check budgets, the common certificate and region membership.

    Raises
    ------
    NumericalFailure
        On the first violated invariant.
    """
    sp = math.fsum(pp.p for pp in alloc.pairs)
    sq = math.fsum(pp.q for pp in alloc.pairs)
    if abs(sp - inst.total_p) > BUDGET_RTOL * max(1.0, inst.total_p):
        raise NumericalFailure(f"user-1 budget off: {sp} vs {inst.total_p}")
    if abs(sq - inst.total_q) > BUDGET_RTOL * max(1.0, inst.total_q):
        raise NumericalFailure(f"user-2 budget off: {sq} vs {inst.total_q}")
    for i, (ch, pp) in enumerate(zip(inst.channels, alloc.pairs)):
        if not in_noisy_region(ch, pp):
            raise NumericalFailure(f"pair {i} {tuple(pp)} is outside the noisy-interference region")
        if not subdifferential(ch, pp).contains(alloc.certificate, tol):
            raise NumericalFailure(
                f"certificate {tuple(alloc.certificate)} not in the subdifferential of channel {i} at {tuple(pp)}"
            )


def _finish(inst: PgicInstance, pairs: List[PowerPair], k: Sequence[float]) -> Allocation:
    alloc = Allocation(
        pairs=pairs,
        certificate=Subgradient(float(k[0]), float(k[1])),
        labels=[label_of(pp) for pp in pairs],
        achieved_rate=total_tin_rate(inst, pairs),
    )
    validate_allocation(inst, alloc)
    return alloc


def _waterfill(gains: Sequence[float], total: float) -> Tuple[float, List[float]]:
    """Price ``k`` and powers ``max(0, 1/(2k) - 1/g)`` summing to ``total``."""

    def excess(k: float) -> float:
        return math.fsum(max(0.0, 1.0 / (2.0 * k) - 1.0 / g) for g in gains) - total

    hi = max(gains) / 2.0
    lo = hi
    while excess(lo) < 0:
        lo /= 2.0
    k = brentq(excess, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
    return k, [max(0.0, 1.0 / (2.0 * k) - 1.0 / g) for g in gains]


def _single_user(inst: PgicInstance, user: int) -> Allocation:
    """Only one user has a positive budget: the other is silent on every sub-channel."""
    chans = inst.channels
    if user == 0:
        k_own, powers = _waterfill([ch.c for ch in chans], inst.total_p)
        pairs = [PowerPair(x, 0.0) for x in powers]
    else:
        k_own, powers = _waterfill([ch.d for ch in chans], inst.total_q)
        pairs = [PowerPair(0.0, x) for x in powers]
    for i, (ch, pp) in enumerate(zip(chans, pairs)):
        if not in_noisy_region(ch, pp):
            raise NotInPowerRegion(f"sub-channel {i} would need power {tuple(pp)} outside its noisy-interference region")
    # the silent user's price must dominate every ray minimum
    k_other = max(subdifferential(ch, pp).minimal()[1 - user] for ch, pp in zip(chans, pairs))
    k = (k_own, k_other) if user == 0 else (k_other, k_own)
    # snap the waterfilling residual onto the largest share
    j = max(range(len(powers)), key=lambda i: powers[i])
    target = inst.total_p if user == 0 else inst.total_q
    fix = target - math.fsum(powers)
    pairs[j] = PowerPair(pairs[j].p + fix, pairs[j].q) if user == 0 else PowerPair(pairs[j].p, pairs[j].q + fix)
    return _finish(inst, pairs, k)


class _Dual:
    def __init__(self, inst: PgicInstance):
        self.inst = inst
        self.budget = np.array([inst.total_p, inst.total_q])

    def responses(self, k: np.ndarray) -> List[BestResponse]:
        return [best_response(ch, k) for ch in self.inst.channels]

    def evaluate(self, k: np.ndarray):
        brs = self.responses(k)
        total = np.array([math.fsum(br.pp.p for br in brs), math.fsum(br.pp.q for br in brs)])
        value = math.fsum(tin_rate(ch, br.pp) - k[0] * br.pp.p - k[1] * br.pp.q for ch, br in zip(self.inst.channels, brs))
        value += float(k @ self.budget)
        return value, self.budget - total, brs

    def hessian(self, k: np.ndarray, brs: List[BestResponse]) -> np.ndarray:
        h = np.zeros((2, 2))
        for ch, br in zip(self.inst.channels, brs):
            jpp, jpq, jqq = response_jacobian(ch, k, br)
            h -= np.array([[jpp, jpq], [jpq, jqq]])
        return h


def _initial_price(inst: PgicInstance) -> np.ndarray:
    # interference-free waterfilling per user
    kp, _ = _waterfill([ch.c for ch in inst.channels], inst.total_p)
    kq, _ = _waterfill([ch.d for ch in inst.channels], inst.total_q)
    return np.array([kp, kq])


def _dual_newton(dual: _Dual, k0: np.ndarray) -> Optional[np.ndarray]:
    k = k0.copy()
    scale = max(1.0, float(np.max(dual.budget)))
    value, grad, brs = dual.evaluate(k)
    for _ in range(_DUAL_MAX_ITER):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm <= _DUAL_TOL * scale:
            return k
        h = dual.hessian(k, brs)
        reg = 1e-12 * max(1.0, float(np.trace(h)))
        step = None
        try:
            cand = -np.linalg.solve(h + reg * np.eye(2), grad)
            if float(cand @ grad) < 0:
                step = cand
        except np.linalg.LinAlgError:
            pass
        if step is None:
            step = -grad * (float(np.min(k)) / max(gnorm, 1e-300))
        neg = step < 0
        amax = float(np.min(-k[neg] / step[neg])) if neg.any() else math.inf
        alpha = 1.0 if amax > 2.0 else 0.5 * amax
        slope = float(step @ grad)
        accepted = False
        for _ in range(60):
            kn = k + alpha * step
            vn, gn, bn = dual.evaluate(kn)
            if vn <= value + 1e-4 * alpha * slope or float(np.max(np.abs(gn))) <= (1 - 1e-4 * alpha) * gnorm:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return None
        moved = float(np.max(np.abs(kn - k) / k))
        k, value, grad, brs = kn, vn, gn, bn
        if float(np.min(k)) < _LAMBDA_FLOOR:
            return None
        if moved < 1e-16:
            break
    if float(np.max(np.abs(grad))) <= 1e-10 * scale:
        return k
    return None


def _nested_bisection(dual: _Dual) -> Optional[np.ndarray]:
    """Fallback: outer bracket on k_p, inner on k_q; both residuals are monotone."""
    chans = dual.inst.channels
    P, Q = dual.budget
    kp_hi = max(ch.c for ch in chans) / 2.0
    kq_hi = max(ch.d for ch in chans) / 2.0

    def sums(kp: float, kq: float) -> Tuple[float, float]:
        brs = dual.responses(np.array([kp, kq]))
        return math.fsum(b.pp.p for b in brs), math.fsum(b.pp.q for b in brs)

    def lower_bracket(f, hi: float) -> Optional[float]:
        lo = hi
        while f(lo) < 0:
            lo /= 2.0
            if lo < _BRACKET_FLOOR * hi:
                return None
        return lo

    def inner(kp: float) -> Optional[float]:
        f = lambda kq: sums(kp, kq)[1] - Q
        lo = lower_bracket(f, kq_hi)
        if lo is None:
            return None
        return brentq(f, lo, kq_hi, xtol=1e-300, rtol=1e-15, maxiter=300)

    def outer(kp: float) -> float:
        kq = inner(kp)
        if kq is None:
            raise _Unreachable
        return sums(kp, kq)[0] - P

    try:
        lo = lower_bracket(outer, kp_hi)
        if lo is None:
            return None
        kp = brentq(outer, lo, kp_hi, xtol=1e-300, rtol=1e-15, maxiter=300)
    except _Unreachable:
        return None
    k = np.array([kp, inner(kp)])
    _, grad, _ = dual.evaluate(k)
    if float(np.max(np.abs(grad))) <= 1e-10 * max(1.0, P, Q):
        return k
    return None


def solve_general(inst: PgicInstance) -> Allocation:
    """Certified optimal allocation for arbitrary budgets.

    Raises
    ------
    NotInPowerRegion
        If no common certificate exists: a sub-channel fails its coefficient
        condition, or the budgets force some sub-channel outside its
        noisy-interference region.
    NumericalFailure
        If the search converges to an allocation that fails validation.
    """
    chans = inst.channels
    for i, ch in enumerate(chans):
        if classify(ch) is ChannelClass.TWO_SIDED and not coefficient_condition(ch):
            raise NotInPowerRegion(f"conditions not met: sub-channel {i} fails the coefficient condition")
    P, Q = inst.total_p, inst.total_q
    if P == 0 and Q == 0:
        k = (max(ch.c for ch in chans) / 2.0, max(ch.d for ch in chans) / 2.0)
        return _finish(inst, [PowerPair(0.0, 0.0) for _ in chans], k)
    if Q == 0:
        return _single_user(inst, 0)
    if P == 0:
        return _single_user(inst, 1)

    dual = _Dual(inst)
    k = _dual_newton(dual, _initial_price(inst))
    if k is None:
        k = _nested_bisection(dual)
    if k is None:
        raise NotInPowerRegion(f"no common certificate found for budgets ({P}, {Q})")
    brs = dual.responses(k)
    for i, br in enumerate(brs):
        if not br.in_subdifferential:
            raise NotInPowerRegion(
                f"sub-channel {i} is pinned to the boundary of its noisy-interference region "
                f"(edge multiplier {br.edge_multiplier:.3g})"
            )
    pairs = [br.pp for br in brs]
    return _finish(inst, pairs, k)


# ---------------------------------------------------------------------------
# region geometry


def activity_table(inst: PgicInstance, alloc: Allocation) -> List[Tuple[str, str]]:
    """``'+'`` where a user's power exceeds the activity threshold, else ``'0'``."""
    return [
        ("+" if pp.p > ACTIVE_THRESHOLD else "0", "+" if pp.q > ACTIVE_THRESHOLD else "0")
        for pp in alloc.pairs
    ]


def _total_response(chans: Sequence[SubChannel], k: Sequence[float]) -> Optional[Tuple[float, float]]:
    sp = sq = 0.0
    for ch in chans:
        res = invert(ch, k)
        if res is None:
            return None
        sp += res[0].p
        sq += res[0].q
    return sp, sq


def power_region_boundary(inst: PgicInstance, resolution: int = 400) -> np.ndarray:
    """Outer boundary of the certified power region as an ``(n, 2)`` array of ``(P, Q)``.

    The boundary of the common price set is made of pieces of each
    sub-channel's own boundary: the slanted-edge image ``S'T'`` and the two
    rays leaving ``S'`` (to larger ``k_p``) and ``T'`` (to larger ``k_q``).
    Every sampled price that the other sub-channels also admit is mapped to
    total power.  Points are ordered by angle from the P axis to the Q axis.
    """
    chans = inst.channels
    two_sided = [ch for ch in chans if classify(ch) is ChannelClass.TWO_SIDED]
    if not two_sided:
        raise ClassError("the power region is unbounded without a two-sided sub-channel")
    for ch in two_sided:
        corner_points(ch)  # raises DegenerateRegion
    kp_top = max(ch.c for ch in chans) / 2.0
    kq_top = max(ch.d for ch in chans) / 2.0
    pts = []
    u = np.linspace(0.0, 1.0, resolution)
    for ch in two_sided:
        s, t = corner_points(ch)
        edge = [tin_gradient(ch, x * t.p, (1.0 - x) * s.q) for x in u[1:-1]]
        s_img = subdifferential(ch, s).minimal()
        t_img = subdifferential(ch, t).minimal()
        ray_s = [(kp, s_img.k_q) for kp in np.linspace(s_img.k_p, max(kp_top, s_img.k_p), resolution // 2)]
        ray_t = [(t_img.k_p, kq) for kq in np.linspace(t_img.k_q, max(kq_top, t_img.k_q), resolution // 2)]
        for k in ray_s + edge + ray_t:
            tot = _total_response(chans, k)
            if tot is not None:
                pts.append(tot)
    if not pts:
        raise NumericalFailure("no boundary price admitted by every sub-channel")
    arr = np.unique(np.round(np.asarray(pts), 14), axis=0)
    ang = np.arctan2(arr[:, 1], arr[:, 0])
    return arr[np.argsort(ang, kind="stable")]


def enumerate_subregions(inst: PgicInstance, resolution: int = 160) -> Dict[Tuple[RegionLabel, ...], dict]:
    """Label patterns present in the common price set, one representative each.

    Prices are sampled on a log-spaced grid.  For every label tuple the
    representative is the sample farthest (in log-price) from any sample with
    a different pattern, which keeps it away from region borders.  Returns a
    mapping ``labels -> {"k": (k_p, k_q), "power": (P, Q), "count": n}``.
    """
    chans = inst.channels
    lo_p = lo_q = math.inf
    for ch in chans:
        if classify(ch) is ChannelClass.TWO_SIDED:
            s, t = corner_points(ch)
            for pp in (s, t):
                kk = subdifferential(ch, pp).minimal()
                lo_p, lo_q = min(lo_p, kk[0]), min(lo_q, kk[1])
    lo_p = 0.5 * lo_p if math.isfinite(lo_p) else 1e-3
    lo_q = 0.5 * lo_q if math.isfinite(lo_q) else 1e-3
    hi_p = 1.5 * max(ch.c for ch in chans) / 2.0
    hi_q = 1.5 * max(ch.d for ch in chans) / 2.0
    gp = np.geomspace(lo_p, hi_p, resolution)
    gq = np.geomspace(lo_q, hi_q, resolution)
    codes = np.full((resolution, resolution), -1, dtype=np.int64)
    keys: Dict[Tuple[RegionLabel, ...], int] = {}
    for i, kp in enumerate(gp):
        for j, kq in enumerate(gq):
            labels = []
            for ch in chans:
                res = invert(ch, (kp, kq))
                if res is None:
                    break
                labels.append(res[1])
            else:
                codes[i, j] = keys.setdefault(tuple(labels), len(keys))
    out = {}
    for labels, code in keys.items():
        mine = codes == code
        # grid steps are uniform in log-price, so index distance is log distance
        depth = distance_transform_edt(np.pad(mine, 1, constant_values=False))[1:-1, 1:-1]
        i, j = np.unravel_index(int(np.argmax(np.where(mine, depth, -1.0))), mine.shape)
        k = (float(gp[i]), float(gq[j]))
        out[labels] = {"k": k, "power": _total_response(chans, k), "count": int(mine.sum())}
    return out
