import math

import numpy as np
import pytest

from pgic.allocator import (
    Allocation,
    _Dual,
    _dual_newton,
    _initial_price,
    _nested_bisection,
    activity_table,
    enumerate_subregions,
    power_region_boundary,
    single_channel_limit,
    solve_general,
    solve_symmetric,
    symmetric_k_star,
    symmetric_power,
    symmetric_profile,
    validate_allocation,
)
from pgic.capacity import tin_gradient, total_tin_rate
from pgic.errors import NotInPowerRegion, NotSymmetric, NumericalFailure, PowerOutOfRange, StrongInterference
from pgic.model import PgicInstance, PowerPair, SubChannel, in_noisy_region, region_slack
from pgic.oracle import GridSpec, grid_search
from pgic.subdiff import RegionLabel, Subgradient, subdifferential

from _support import REF_PAIR, in_region_instance, random_symmetric

SYM = SubChannel(0.04, 0.04, 1, 1)
STRONG = SubChannel(0.04, 0.04, 1, 1)
WEAK = SubChannel(0.02, 0.02, 0.5, 0.5)


class TestSymmetricProfile:
    def test_identical_pair(self):
        prof = symmetric_profile([SYM, SYM])
        assert prof.w == pytest.approx([0.01, 0.01], rel=1e-14)
        assert prof.w_hat == pytest.approx(0.01, rel=1e-14)
        assert prof.r == 2
        assert prof.p_bar == pytest.approx(75.0, rel=1e-13)
        assert prof.p_bar == pytest.approx(2 * single_channel_limit(SYM), rel=1e-13)

    def test_single_channel(self):
        assert symmetric_profile([SYM]).p_bar == pytest.approx(37.5, rel=1e-13)

    def test_unequal_pair(self):
        # 30-digit evaluation of the closed forms
        prof = symmetric_profile([WEAK, STRONG])
        assert prof.w == pytest.approx([0.005, 0.01], rel=1e-13)
        assert prof.p_bar == pytest.approx(84.9246996272776347, rel=1e-12)
        assert prof.order == [1, 0]
        assert prof.r == 2

    def test_strong_interference(self):
        with pytest.raises(StrongInterference):
            symmetric_profile([SubChannel(0.25, 0.25, 1, 1)])

    def test_limit_allowed_on_request(self):
        assert symmetric_profile([SubChannel(0.25, 0.25, 1, 1)], allow_limit=True).p_bar == 0.0

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            symmetric_profile([SubChannel(0.04, 0.05, 1, 1)])

    def test_threshold_is_price_at_single_channel_limit(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            ch = random_symmetric(rng)
            w = symmetric_profile([ch]).w[0]
            assert symmetric_power(ch, w) == pytest.approx(single_channel_limit(ch), rel=1e-10)


class TestSolveSymmetric:
    def test_even_split(self):
        alloc = solve_symmetric([SYM, SYM], 20)
        for pp in alloc.pairs:
            assert pp == pytest.approx((10, 10), rel=1e-12)
        # 1 / (1.4 * 11.4) at 30 digits
        assert 2 * alloc.certificate.k_p == pytest.approx(0.0626566416040100251, rel=1e-12)

    def test_zero_budget(self):
        alloc = solve_symmetric([SYM, WEAK], 0)
        assert all(pp == (0, 0) for pp in alloc.pairs)
        assert 2 * alloc.certificate.k_p == pytest.approx(1.0)

    def test_above_p_bar(self):
        with pytest.raises(PowerOutOfRange):
            solve_symmetric([SYM, SYM], 75.01)

    def test_exactly_p_bar(self):
        alloc = solve_symmetric([SYM, SYM], 75.0)
        for pp in alloc.pairs:
            assert pp == pytest.approx((37.5, 37.5), rel=1e-10)

    def test_small_budget_uses_only_the_better_channel(self):
        # channel 2 activates once k* drops below its direct gain 0.5,
        # i.e. at P = P1*(0.5) = 0.895067009290203773 (30-digit value)
        alloc = solve_symmetric([STRONG, WEAK], 0.8)
        assert alloc.pairs[1] == (0, 0)
        assert alloc.pairs[0] == pytest.approx((0.8, 0.8))
        assert symmetric_power(STRONG, 0.5) == pytest.approx(0.895067009290203773, rel=1e-13)
        alloc = solve_symmetric([STRONG, WEAK], 1.0)
        assert alloc.pairs[1].p > 0

    def test_small_budget_matches_grid_oracle(self):
        inst = PgicInstance((STRONG, WEAK), 0.8, 0.8)
        res = grid_search(inst, GridSpec(64))
        cell = 0.8 / 64
        assert res.pairs[0].p >= 0.8 - cell and res.pairs[0].q >= 0.8 - cell

    def test_monotone_activation(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            chans = [random_symmetric(rng) for _ in range(4)]
            prof = symmetric_profile(chans)
            first = {}
            for P in np.linspace(0, prof.p_bar, 60)[1:]:
                alloc = solve_symmetric(chans, P)
                k = 2 * alloc.certificate.k_p
                for i, ch in enumerate(chans):
                    assert (alloc.pairs[i].p > 1e-12) == (k < ch.c)
                    if alloc.pairs[i].p > 1e-12:
                        first.setdefault(i, P)
            for i in first:
                for j in first:
                    if chans[i].c > chans[j].c:
                        assert first[i] <= first[j]

    def test_unique_price_from_any_bracket(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            chans = [random_symmetric(rng) for _ in range(rng.integers(1, 5))]
            prof = symmetric_profile(chans)
            P = rng.uniform(0.01, 0.99) * prof.p_bar
            c_max = max(ch.c for ch in chans)
            k0 = symmetric_k_star(chans, P)
            k1 = symmetric_k_star(chans, P, lo=prof.w_hat * 0.999999, hi=c_max * 10)
            k2 = symmetric_k_star(chans, P, lo=k0 * 0.5 if k0 * 0.5 > prof.w_hat * 0.5 else prof.w_hat * 0.5, hi=c_max * 1.0001)
            assert abs(k0 - k1) < 1e-10 and abs(k0 - k2) < 1e-10

    def test_total_power_non_increasing_in_price(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            chans = [random_symmetric(rng) for _ in range(3)]
            prof = symmetric_profile(chans)
            ks = np.linspace(prof.w_hat, max(ch.c for ch in chans), 2000)
            tot = [math.fsum(symmetric_power(ch, k) for ch in chans) for k in ks]
            assert np.all(np.diff(tot) <= 1e-12)
            assert np.max(np.abs(np.diff(tot))) < 0.05 * max(tot[0], 1e-12) + 1e-12


class TestSolveGeneral:
    def test_single_channel_returns_budgets(self):
        ch = REF_PAIR[0]
        alloc = solve_general(PgicInstance((ch,), 0.3, 0.2))
        assert alloc.pairs[0] == pytest.approx((0.3, 0.2), abs=1e-12)
        assert alloc.certificate == pytest.approx(tin_gradient(ch, 0.3, 0.2), rel=1e-10)

    def test_small_budgets_behave_like_one_channel(self):
        alloc = solve_general(PgicInstance(REF_PAIR, 0.15, 0.1))
        assert alloc.pairs[1] == (0, 0)
        assert alloc.labels == [RegionLabel.A1, RegionLabel.A4]
        assert activity_table(None, alloc) == [("+", "+"), ("0", "0")]

    def test_matches_symmetric_solver(self):
        a = solve_general(PgicInstance((SYM, SYM), 20, 20))
        b = solve_symmetric([SYM, SYM], 20)
        for x, y in zip(a.pairs, b.pairs):
            assert x == pytest.approx(y, abs=1e-8)

    def test_zero_budgets(self):
        alloc = solve_general(PgicInstance(REF_PAIR, 0, 0))
        assert activity_table(None, alloc) == [("0", "0"), ("0", "0")]
        assert alloc.achieved_rate == 0

    def test_single_user_waterfilling(self):
        # below the activation level of channel 2 (P = 1/1.2 - 1/4) only channel 1 is used
        alloc = solve_general(PgicInstance(REF_PAIR, 0.5, 0))
        assert activity_table(None, alloc) == [("+", "0"), ("0", "0")]
        alloc = solve_general(PgicInstance(REF_PAIR, 0.7, 0))
        assert activity_table(None, alloc) == [("+", "0"), ("+", "0")]
        assert alloc.pairs[0].p - alloc.pairs[1].p == pytest.approx(1 / 1.2 - 0.25, rel=1e-10)
        alloc = solve_general(PgicInstance(REF_PAIR, 0, 0.7))
        assert activity_table(None, alloc) == [("0", "+"), ("0", "+")]

    def test_single_user_outside_region(self):
        with pytest.raises(NotInPowerRegion):
            solve_general(PgicInstance(REF_PAIR, 1.4, 0))

    def test_budgets_too_large(self):
        with pytest.raises(NotInPowerRegion):
            solve_general(PgicInstance(REF_PAIR, 2.0, 2.0))

    def test_conditions_not_met(self):
        with pytest.raises(NotInPowerRegion, match="conditions not met"):
            solve_general(PgicInstance((SubChannel(0.6, 0.6, 1, 1),), 0.1, 0.1))

    def test_random_instances_are_certified(self):
        rng = np.random.default_rng(4)
        for _ in range(150):
            inst, k, pairs = in_region_instance(rng, int(rng.integers(1, 5)))
            alloc = solve_general(inst)
            validate_allocation(inst, alloc)
            for ch, pp in zip(inst.channels, alloc.pairs):
                assert subdifferential(ch, pp).contains(alloc.certificate, 1e-8)
            assert alloc.achieved_rate >= total_tin_rate(inst, pairs) - 1e-10

    def test_nested_bisection_fallback_agrees(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            inst, _, _ = in_region_instance(rng, int(rng.integers(1, 4)))
            if inst.total_p == 0 or inst.total_q == 0:
                continue
            dual = _Dual(inst)
            k_newton = _dual_newton(dual, _initial_price(inst))
            k_bisect = _nested_bisection(dual)
            assert k_bisect is not None
            _, g1, b1 = dual.evaluate(k_newton)
            _, g2, b2 = dual.evaluate(k_bisect)
            for x, y in zip(b1, b2):
                assert x.pp == pytest.approx(y.pp, abs=1e-7)

    def test_validation_catches_tampering(self):
        inst = PgicInstance((SYM, SYM), 20, 20)
        alloc = solve_general(inst)
        bad = Allocation(alloc.pairs, Subgradient(alloc.certificate.k_p * 1.01, alloc.certificate.k_q), alloc.labels, 0)
        with pytest.raises(NumericalFailure):
            validate_allocation(inst, bad)
        bad = Allocation([PowerPair(11, 10), PowerPair(10, 10)], alloc.certificate, alloc.labels, 0)
        with pytest.raises(NumericalFailure):
            validate_allocation(inst, bad)

    def test_supporting_hyperplane(self):
        rng = np.random.default_rng(6)
        checked = 0
        while checked < 40:
            inst, _, _ = in_region_instance(rng, int(rng.integers(2, 4)))
            alloc = solve_general(inst)
            active = [i for i, pp in enumerate(alloc.pairs) if pp.p > 0.05]
            if len(active) < 2:
                continue
            i, j = active[:2]
            for delta in (1e-3, 1e-2):
                pairs = list(alloc.pairs)
                pairs[i] = PowerPair(pairs[i].p + delta, pairs[i].q)
                pairs[j] = PowerPair(pairs[j].p - delta, pairs[j].q)
                if not all(in_noisy_region(ch, pp) for ch, pp in zip(inst.channels, pairs)):
                    continue
                assert total_tin_rate(inst, pairs) <= alloc.achieved_rate + 1e-12
            checked += 1


class TestRegions:
    def test_reference_activity_examples(self):
        # region O1AE and region O2MN
        alloc = solve_general(PgicInstance(REF_PAIR, 0.3, 0))
        assert activity_table(None, alloc) == [("+", "0"), ("0", "0")]
        alloc = solve_general(PgicInstance(REF_PAIR, 0.55, 0.55))
        assert activity_table(None, alloc) == [("+", "+"), ("+", "+")]

    def test_boundary_hits_point_c(self):
        bd = power_region_boundary(PgicInstance(REF_PAIR, 1, 1), 200)
        on_axis = bd[bd[:, 1] == 0]
        # 30-digit value of p_t1 + (1 + c1 p_t1)/c1 - 1/c2
        assert on_axis[:, 0].max() == pytest.approx(1.35662965823870419, rel=1e-10)
        assert np.all(np.diff(np.arctan2(bd[:, 1], bd[:, 0])) >= 0)

    def test_boundary_ray_shooting(self):
        bd = power_region_boundary(PgicInstance(REF_PAIR, 1, 1), 100)
        for P, Q in bd[::7]:
            solve_general(PgicInstance(REF_PAIR, 0.99 * P, 0.99 * Q))
            with pytest.raises(NotInPowerRegion):
                solve_general(PgicInstance(REF_PAIR, 1.01 * P, 1.01 * Q))

    def test_single_channel_boundary_is_slanted_edge(self):
        ch = REF_PAIR[1]
        bd = power_region_boundary(PgicInstance((ch,), 1, 1), 100)
        for P, Q in bd:
            assert abs(region_slack(ch, P, Q)) < 1e-10

    def test_identical_channels_double_the_region(self):
        one = power_region_boundary(PgicInstance((SYM,), 1, 1), 100)
        two = power_region_boundary(PgicInstance((SYM, SYM), 1, 1), 100)
        assert two == pytest.approx(2 * one, rel=1e-8, abs=1e-8)

    def test_subregions_of_reference_instance(self):
        subs = enumerate_subregions(PgicInstance(REF_PAIR, 1, 1), 80)
        names = {tuple(l.value for l in k) for k in subs}
        assert names == {(2, 4), (2, 2), (1, 2), (1, 4), (1, 1), (3, 4), (3, 3), (1, 3), (4, 4)}
