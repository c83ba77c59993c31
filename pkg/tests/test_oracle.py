import math

import numpy as np
import pytest

from pgic.allocator import solve_general
from pgic.errors import GridTooLarge
from pgic.model import PgicInstance, SubChannel
from pgic.oracle import GridSpec, _compositions, compare, grid_search

from _support import REF_PAIR, in_region_instance


def test_grid_spec_validation():
    for bad in (0, 1, 2.5, -3):
        with pytest.raises(ValueError):
            GridSpec(bad)


def test_compositions_lexicographic():
    comp = _compositions(3, 3)
    assert len(comp) == math.comb(5, 2)
    assert comp.sum(axis=1).tolist() == [3] * len(comp)
    assert [tuple(r) for r in comp] == sorted(tuple(r) for r in comp)
    assert tuple(comp[0]) == (0, 0, 3) and tuple(comp[-1]) == (3, 0, 0)


def test_single_channel_takes_everything():
    inst = PgicInstance((SubChannel(0.1, 0.2, 1, 2),), 1.5, 0.5)
    res = grid_search(inst, GridSpec(8))
    assert res.pairs[0].p == 1.5 and res.pairs[0].q == 0.5
    assert res.delta == pytest.approx(1.5 / 8 * 1.5)


def test_identical_pair_splits_evenly():
    ch = SubChannel(0.05, 0.05, 1, 1)
    inst = PgicInstance((ch, ch), 1, 1)
    res = grid_search(inst, GridSpec(40))
    for pp in res.pairs:
        assert abs(pp.p - 0.5) <= res.step_p + 1e-12
        assert abs(pp.q - 0.5) <= res.step_q + 1e-12


def test_only_first_channel_active_at_small_budgets():
    inst = PgicInstance(REF_PAIR, 0.3, 0.3)
    alloc = solve_general(inst)
    assert alloc.pairs[1].p == 0 and alloc.pairs[1].q == 0
    res = grid_search(inst, GridSpec(60))
    assert res.pairs[0].p >= 0.3 - res.step_p - 1e-12
    assert res.pairs[0].q >= 0.3 - res.step_q - 1e-12


def test_budgets_met_exactly():
    rng = np.random.default_rng(0)
    inst, _, _ = in_region_instance(rng, 3)
    res = grid_search(inst, GridSpec(16))
    assert math.fsum(pp.p for pp in res.pairs) == pytest.approx(inst.total_p, rel=1e-12)
    assert math.fsum(pp.q for pp in res.pairs) == pytest.approx(inst.total_q, rel=1e-12)


def test_solver_within_grid_slack():
    rng = np.random.default_rng(1)
    for m in (1, 2, 3):
        for _ in range(4):
            inst, _, _ = in_region_instance(rng, m)
            alloc = solve_general(inst)
            rep = compare(alloc, grid_search(inst, GridSpec(24)))
            assert rep.ok
            assert alloc.achieved_rate >= grid_search(inst, GridSpec(24)).rate - 1e-12 - rep.delta


def test_refinement_never_loses_rate():
    rng = np.random.default_rng(2)
    inst, _, _ = in_region_instance(rng, 2)
    rates = [grid_search(inst, GridSpec(n)).rate for n in (8, 16, 32, 64)]
    assert all(b >= a - 1e-15 for a, b in zip(rates, rates[1:]))
    assert solve_general(inst).achieved_rate >= rates[-1] - 1e-10


def test_grid_too_large():
    ch = SubChannel(0.1, 0.1, 1, 1)
    with pytest.raises(GridTooLarge):
        grid_search(PgicInstance((ch,) * 4, 1, 1), GridSpec(200))
