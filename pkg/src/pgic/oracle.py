"""Brute-force grid search over power allocations, used to cross-check the solvers.

Each user's budget is split over the sub-channels on a uniform simplex grid
with ``steps_per_axis`` quanta; the last sub-channel takes whatever remains so
the budgets are met exactly.  All pairs of splits are scored by the total TIN
rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import List

import numpy as np

from .capacity import total_tin_rate
from .errors import GridTooLarge
from .model import PgicInstance, PowerPair

__all__ = ["GridSpec", "OracleResult", "CompareReport", "grid_search", "compare", "MAX_EVALUATIONS"]

MAX_EVALUATIONS = 10 ** 8
_CHUNK_CELLS = 2 ** 21


@dataclass(frozen=True)
class GridSpec:
    steps_per_axis: int

    def __post_init__(self):
        if not isinstance(self.steps_per_axis, int) or self.steps_per_axis < 2:
            raise ValueError(f"steps_per_axis must be an integer >= 2, got {self.steps_per_axis!r}")


@dataclass
class OracleResult:
    pairs: List[PowerPair]
    rate: float
    steps: int
    step_p: float  # grid spacing for user 1
    step_q: float
    delta: float  # rate slack allowed by the grid spacing


@dataclass
class CompareReport:
    rate_gap: float  # oracle minus solver; <= delta for a correct solver
    delta: float
    distance: float  # max componentwise power difference
    distance_cells: float  # the same in units of grid spacing
    ok: bool


def _compositions(n: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``n``, in lexicographic order."""
    if parts == 1:
        return np.array([[n]], dtype=np.int64)
    rows = []
    # stars and bars: bar positions among n + parts - 1 slots
    for bars in combinations(range(n + parts - 1), parts - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(n + parts - 2 - prev)
        rows.append(row)
    arr = np.array(rows, dtype=np.int64)
    order = np.lexsort(arr.T[::-1])
    return arr[order]


def grid_search(inst: PgicInstance, grid: GridSpec) -> OracleResult:
    """Exhaustive maximizer of the total TIN rate over the budget grid.

    Ties go to the lexicographically smallest ``(p_1..p_m, q_1..q_m)``.

    Raises
    ------
    GridTooLarge
        If the grid needs more than ``MAX_EVALUATIONS`` allocations.
    """
    m = inst.m
    n = grid.steps_per_axis
    count = math.comb(n + m - 1, m - 1)
    if count * count > MAX_EVALUATIONS:
        raise GridTooLarge(f"{count}^2 allocations exceed the limit of {MAX_EVALUATIONS}")
    P, Q = inst.total_p, inst.total_q
    comp = _compositions(n, m)
    levels = np.arange(n + 1)
    # rate table per channel over all (p level, q level)
    tables = []
    for ch in inst.channels:
        p = levels[:, None] * (P / n)
        q = levels[None, :] * (Q / n)
        tables.append(0.5 * (np.log1p(ch.c * p / (1 + ch.a * q)) + np.log1p(ch.d * q / (1 + ch.b * p))))

    best_val = -math.inf
    best = (0, 0)
    rows = max(1, _CHUNK_CELLS // len(comp))
    for start in range(0, len(comp), rows):
        cp = comp[start : start + rows]
        tot = np.zeros((len(cp), len(comp)))
        for i, tab in enumerate(tables):
            tot += tab[cp[:, i][:, None], comp[:, i][None, :]]
        flat = int(np.argmax(tot))
        val = tot.flat[flat]
        if val > best_val:
            best_val = val
            best = (start + flat // len(comp), flat % len(comp))

    up, uq = comp[best[0]], comp[best[1]]
    ps = [float(x) * P / n for x in up[:-1]]
    qs = [float(x) * Q / n for x in uq[:-1]]
    ps.append(max(P - math.fsum(ps), 0.0))
    qs.append(max(Q - math.fsum(qs), 0.0))
    pairs = [PowerPair(p, q) for p, q in zip(ps, qs)]
    step = max(P, Q) / n
    delta = step * math.fsum(ch.c + ch.d for ch in inst.channels) / 2.0
    return OracleResult(pairs, total_tin_rate(inst, pairs), n, P / n, Q / n, delta)


def compare(solver_alloc, oracle_result: OracleResult, tol: float = 1e-9) -> CompareReport:
    """Rate gap and allocation distance between a solver allocation and the grid optimum."""
    gap = oracle_result.rate - solver_alloc.achieved_rate
    dist = 0.0
    cells = 0.0
    for s, o in zip(solver_alloc.pairs, oracle_result.pairs):
        dp, dq = abs(s.p - o.p), abs(s.q - o.q)
        dist = max(dist, dp, dq)
        if oracle_result.step_p > 0:
            cells = max(cells, dp / oracle_result.step_p)
        if oracle_result.step_q > 0:
            cells = max(cells, dq / oracle_result.step_q)
    return CompareReport(gap, oracle_result.delta, dist, cells, gap <= oracle_result.delta + tol)
