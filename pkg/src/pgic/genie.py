"""Genie-aided upper bounds tangent to the sub-channel capacity at the optimum.

Receiver 1 is given a noisy copy of user 1's signal with noise variance
``sigma1_sq`` correlated (coefficient ``rho1``) with its own noise; receiver 2
gets the mirror construction.  With the parameters fixed by the optimal
powers ``(P*, Q*)``, each sub-channel contributes a bound ``f(p, q)`` that is
concave, non-decreasing and touches the TIN rate at ``(P*, Q*)``.

In the parameter equations write ``A = (b/c)(1+aQ*)^2``, ``B = (a/d)(1+bP*)^2``,
``X = b*sigma1_sq`` and ``Y = a*sigma2_sq``.  Then ``X`` solves
``X^2 - (A-B+1)X + A = 0`` and ``Y`` the mirror equation, and both share the
discriminant ``(1-(sqrt(A)+sqrt(B))^2)(1-(sqrt(A)-sqrt(B))^2)``.  Real
parameters exist exactly when ``sqrt(A) + sqrt(B) <= 1``, which is the
noisy-interference condition at ``(P*, Q*)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .capacity import tin_rate
from .errors import AuditFailure, ClassError, DomainError, Infeasible
from .model import ChannelClass, PgicInstance, SubChannel, classify

__all__ = [
    "GenieParams",
    "genie_params",
    "feasible_branches",
    "rx1_side_params",
    "rx2_side_params",
    "f_value",
    "TangencyReport",
    "tangency_check",
    "AuditReport",
    "bound_audit",
]

DISCRIMINANT_TOL = 1e-10
_IDENTITY_RTOL = 1e-9


@dataclass(frozen=True)
class GenieParams:
    """Genie noise parameters for one sub-channel.

    ``sigma2_sq``/``rho2`` are ``None`` when receiver 2 sees no interference,
    and likewise ``sigma1_sq``/``rho1`` for receiver 1.  ``root_choice`` is
    ``"-"`` or ``"+"`` for two-sided channels and ``None`` otherwise.
    """

    sigma1_sq: Optional[float]
    sigma2_sq: Optional[float]
    rho1: Optional[float]
    rho2: Optional[float]
    channel_class: ChannelClass
    root_choice: Optional[str] = None


def rx1_side_params(ch: SubChannel, opt: Sequence[float]) -> Tuple[float, float]:
    """``(sigma1_sq, rho1)`` for a receiver 1 whose transmitter pair causes no interference at receiver 2."""
    rho1_sq = 1.0 - ch.a / ch.d
    return (1.0 + ch.a * opt[1]) ** 2 / (ch.c * rho1_sq), math.sqrt(rho1_sq)


def rx2_side_params(ch: SubChannel, opt: Sequence[float]) -> Tuple[float, float]:
    rho2_sq = 1.0 - ch.b / ch.c
    return (1.0 + ch.b * opt[0]) ** 2 / (ch.d * rho2_sq), math.sqrt(rho2_sq)


def _two_sided_roots(ch: SubChannel, opt: Sequence[float]):
    p_opt, q_opt = opt
    A = ch.b / ch.c * (1.0 + ch.a * q_opt) ** 2
    B = ch.a / ch.d * (1.0 + ch.b * p_opt) ** 2
    sa, sb = math.sqrt(A), math.sqrt(B)
    # factored form of (A-B+1)^2 - 4A, accurate near the region boundary
    disc = (1.0 - (sa + sb) ** 2) * (1.0 - (sa - sb) ** 2)
    if disc < -DISCRIMINANT_TOL:
        return None
    root = math.sqrt(max(disc, 0.0))
    sx, sy = A - B + 1.0, B - A + 1.0
    roots = {}
    for sign in ("-", "+"):
        if sign == "+":
            x, y = 0.5 * (sx + root), 0.5 * (sy + root)
        else:
            # reciprocal forms avoid cancellation in the small roots
            x = 2.0 * A / (sx + root) if sx + root > 0 else math.nan
            y = 2.0 * B / (sy + root) if sy + root > 0 else math.nan
        roots[sign] = (x, y)
    return A, B, roots


def feasible_branches(ch: SubChannel, opt: Sequence[float]) -> List[GenieParams]:
    """All valid two-sided parameter sets at ``opt``, smaller ``sigma1_sq`` first.

    A branch pairs equal signs in the two quadratic roots; mixed pairs violate
    the identities that make the bound tangent and are discarded.
    """
    if classify(ch) is not ChannelClass.TWO_SIDED:
        raise ClassError("branch enumeration applies to two-sided channels")
    out = _two_sided_roots(ch, opt)
    if out is None:
        return []
    A, B, roots = out
    found = []
    for sign, (x, y) in roots.items():
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        if x < 0 or y < 0 or x > 1 or y > 1:
            continue
        # identities (1-Y)X = A and (1-X)Y = B pin the branch pairing
        if abs((1.0 - y) * x - A) > _IDENTITY_RTOL * max(A, 1e-300) * 10 + 1e-15:
            continue
        if abs((1.0 - x) * y - B) > _IDENTITY_RTOL * max(B, 1e-300) * 10 + 1e-15:
            continue
        found.append(
            GenieParams(
                sigma1_sq=x / ch.b,
                sigma2_sq=y / ch.a,
                rho1=math.sqrt(1.0 - y),
                rho2=math.sqrt(1.0 - x),
                channel_class=ChannelClass.TWO_SIDED,
                root_choice=sign,
            )
        )
    found.sort(key=lambda g: g.sigma1_sq)
    return found


def genie_params(ch: SubChannel, opt: Sequence[float]) -> GenieParams:
    """Genie parameters tuned to the optimal powers ``opt`` of this sub-channel.

    Raises
    ------
    Infeasible
        If no valid parameters exist, which happens exactly when ``opt``
        lies outside the noisy-interference region.
    """
    cls = classify(ch)
    if cls is ChannelClass.TWO_SIDED:
        branches = feasible_branches(ch, opt)
        if not branches:
            raise Infeasible(f"no real genie parameters at {tuple(opt)} for {ch}")
        return branches[0]
    if cls is ChannelClass.ONE_SIDED_INTO_RX1:
        s1, r1 = rx1_side_params(ch, opt)
        return GenieParams(s1, None, r1, None, cls)
    if cls is ChannelClass.ONE_SIDED_INTO_RX2:
        s2, r2 = rx2_side_params(ch, opt)
        return GenieParams(None, s2, None, r2, cls)
    return GenieParams(None, None, None, None, cls)


def _genie_term(x, y, cross, direct, sigma_sq, rho):
    """Half-log bound for one receiver; ``x`` own power, ``y`` interfering power."""
    s = 1.0 + cross * y
    den = s - rho * rho
    if np.any(den <= 0):
        raise DomainError("genie denominator 1 + a*Q - rho^2 is not positive")
    mis = 1.0 / math.sqrt(sigma_sq) - math.sqrt(direct) * rho / s
    return 0.5 * np.log1p(s * x / den * mis * mis + direct * x / s)


def _f(ch: SubChannel, gp: GenieParams, p, q):
    cls = gp.channel_class
    if cls is ChannelClass.TWO_SIDED:
        return _genie_term(p, q, ch.a, ch.c, gp.sigma1_sq, gp.rho1) + _genie_term(
            q, p, ch.b, ch.d, gp.sigma2_sq, gp.rho2
        )
    if cls is ChannelClass.ONE_SIDED_INTO_RX1:
        return _genie_term(p, q, ch.a, ch.c, gp.sigma1_sq, gp.rho1) + 0.5 * np.log1p(ch.d * q)
    if cls is ChannelClass.ONE_SIDED_INTO_RX2:
        return _genie_term(q, p, ch.b, ch.d, gp.sigma2_sq, gp.rho2) + 0.5 * np.log1p(ch.c * p)
    return 0.5 * np.log1p(ch.c * p) + 0.5 * np.log1p(ch.d * q)


def f_value(ch: SubChannel, gp: GenieParams, opt: Sequence[float], pp: Sequence[float]) -> float:
    """Upper-bound function of the sub-channel at ``pp`` with parameters frozen at ``opt``.

    ``opt`` only fixes ``gp``; it is accepted so that call sites read like the
    bound they evaluate.  Returns nats.
    """
    if classify(ch) is not gp.channel_class:
        raise ClassError("genie parameters were built for a different channel class")
    return float(_f(ch, gp, float(pp[0]), float(pp[1])))


@dataclass(frozen=True)
class TangencyReport:
    value_gap: float
    grad_gap: float


def _fd_gradient(fun, p: float, q: float, h: float) -> Tuple[float, float]:
    def partial(shift):
        x0 = p if shift == 0 else q
        at = (lambda t: fun(t, q)) if shift == 0 else (lambda t: fun(p, t))
        if x0 - h >= 0:
            return (at(x0 + h) - at(x0 - h)) / (2 * h)
        # second-order forward difference on the boundary
        return (-3 * at(x0) + 4 * at(x0 + h) - at(x0 + 2 * h)) / (2 * h)

    return partial(0), partial(1)


def tangency_check(ch: SubChannel, gp: GenieParams, opt: Sequence[float], h: float = 1e-6) -> TangencyReport:
    """Value and finite-difference gradient mismatch between the bound and the TIN rate at ``opt``.

    On an axis the derivative across it is taken one-sided, pointing inward.
    """
    p, q = float(opt[0]), float(opt[1])
    fv = lambda x, y: f_value(ch, gp, opt, (x, y))
    cv = lambda x, y: tin_rate(ch, (x, y))
    gf = _fd_gradient(fv, p, q, h)
    gc = _fd_gradient(cv, p, q, h)
    return TangencyReport(
        value_gap=abs(fv(p, q) - cv(p, q)),
        grad_gap=max(abs(gf[0] - gc[0]), abs(gf[1] - gc[1])),
    )


@dataclass
class AuditReport:
    samples: int
    worst_margin: float  # min over samples of sum f(opt) - sum f(sample)
    concavity_margin: float  # min of f(mix) - mix of f
    monotonicity_margin: float  # min of f(x + step) - f(x)
    passed: bool


def bound_audit(inst: PgicInstance, alloc_opt, samples: int, seed: int = 0, tol: float = 1e-8) -> AuditReport:
    """Monte-Carlo audit of the upper bound at an optimal allocation.

    Draws ``samples`` allocations with ``sum p <= P`` and ``sum q <= Q`` and
    checks that none beats the bound at the optimum; also spot-checks
    concavity and monotonicity of every sub-channel bound.

    Raises
    ------
    AuditFailure
        If any check is violated by more than ``tol``.
    """
    if samples <= 0:
        return AuditReport(0, math.inf, math.inf, math.inf, True)
    rng = np.random.default_rng(seed)
    chans = inst.channels
    m = len(chans)
    params = [genie_params(ch, pp) for ch, pp in zip(chans, alloc_opt.pairs)]
    f_opt = math.fsum(f_value(ch, gp, pp, pp) for ch, gp, pp in zip(chans, params, alloc_opt.pairs))

    # Dirichlet over m channels plus one slack share gives sum <= budget
    wp = rng.dirichlet(np.ones(m + 1), size=samples)[:, :m] * inst.total_p
    wq = rng.dirichlet(np.ones(m + 1), size=samples)[:, :m] * inst.total_q
    total = np.zeros(samples)
    for l, (ch, gp) in enumerate(zip(chans, params)):
        total += _f(ch, gp, wp[:, l], wq[:, l])
    worst = float(f_opt - np.max(total))

    conc = mono = math.inf
    span_p = max(inst.total_p, 1.0) * 2.0
    span_q = max(inst.total_q, 1.0) * 2.0
    for ch, gp in zip(chans, params):
        x = rng.uniform(0, 1, (samples, 2)) * (span_p, span_q)
        y = rng.uniform(0, 1, (samples, 2)) * (span_p, span_q)
        lam = rng.uniform(0, 1, samples)
        z = lam[:, None] * x + (1 - lam[:, None]) * y
        fx, fy, fz = _f(ch, gp, x[:, 0], x[:, 1]), _f(ch, gp, y[:, 0], y[:, 1]), _f(ch, gp, z[:, 0], z[:, 1])
        conc = min(conc, float(np.min(fz - lam * fx - (1 - lam) * fy)))
        step = rng.uniform(0, 1, (samples, 2)) * (span_p, span_q) * 0.1
        axis = rng.integers(0, 2, samples)
        step[np.arange(samples), 1 - axis] = 0.0
        w = x + step
        mono = min(mono, float(np.min(_f(ch, gp, w[:, 0], w[:, 1]) - fx)))

    passed = worst >= -tol and conc >= -tol and mono >= -tol
    report = AuditReport(samples, worst, conc, mono, passed)
    if not passed:
        raise AuditFailure(f"genie bound audit failed: {report}")
    return report
