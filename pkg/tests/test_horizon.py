"""Long-term layer: recursion arithmetic, backward sweeps, the grid search
against the brute-force oracle, and forward policy evaluation."""

import dataclasses
import logging

import numpy as np
import pytest

from dispatch_mcd import checks
from dispatch_mcd.degradation import StorageParams
from dispatch_mcd.dispatch import DayProfile, GenParams, LoadParams
from dispatch_mcd.horizon import (
    REASON_BUDGET_MISMATCH,
    REASON_UNDERSHOOT,
    CostPolicy,
    DiscountModel,
    McdGrid,
    PeriodSpec,
    Plan,
    TooLargeError,
    UsagePolicy,
    backward_sweep,
    brute_force_long_term,
    evaluate_schedule,
    mcd_recursion_step,
    no_storage_baseline,
    optimize_mcd,
)

STO_TABLE = StorageParams()  # full-scale ratings


def flat_day(load=60.0, wind=0.0):
    return DayProfile(wind_mwh=np.full(24, wind), load_mw=np.full(24, load))


def make_plan(days, storage, rate=0.07, gens=None, loads=None, weight=1.0):
    gens = gens or [GenParams()] * len(days)
    loads = loads or [LoadParams()] * len(days)
    periods = tuple(
        PeriodSpec(day=d, gen=g, load=l, weight_days=weight, profile_key=i)
        for i, (d, g, l) in enumerate(zip(days, gens, loads))
    )
    return Plan(periods=periods, storage=storage,
                discount=DiscountModel(annual_rate=rate, periods_per_year=1))


class TestDiscountModel:
    def test_year_indexing_and_delta(self):
        d = DiscountModel(annual_rate=0.07, periods_per_year=52)
        assert d.year_index(1) == 0
        assert d.year_index(52) == 0
        assert d.year_index(53) == 1
        assert d.delta(1) == 1.0
        assert d.delta(53) == pytest.approx(1 / 1.07)
        assert d.ratio(53) == pytest.approx(1 / 1.07)
        assert d.ratio(54) == pytest.approx(1.0)

    def test_nonincreasing(self):
        d = DiscountModel(annual_rate=0.05, periods_per_year=3)
        deltas = [d.delta(t) for t in range(1, 20)]
        assert all(a >= b for a, b in zip(deltas, deltas[1:]))


class TestRecursionStep:
    def test_same_year_identity(self):
        assert mcd_recursion_step(10.0, 0.0, 1.0, STO_TABLE) == pytest.approx(10.0)

    def test_year_boundary_discounts(self):
        v = mcd_recursion_step(10.0, 0.0, 1.0 / 1.07, STO_TABLE)
        assert v == pytest.approx(9.34579, abs=1e-5)

    def test_soh_term_adds_value(self):
        v = mcd_recursion_step(10.0, -1000.0, 1.0, STO_TABLE)
        assert v == pytest.approx(10.00025, abs=1e-12)

    def test_negative_output_clamped(self, caplog):
        with caplog.at_level(logging.WARNING):
            v = mcd_recursion_step(0.0, 4.0e6, 1.0, STO_TABLE)
        assert v == 0.0
        assert any("clamp" in rec.message for rec in caplog.records)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            mcd_recursion_step(-1.0, 0.0, 1.0, STO_TABLE)
        with pytest.raises(ValueError):
            mcd_recursion_step(1.0, 0.0, 1.5, STO_TABLE)


class TestBackwardSweep:
    def test_high_cost_leaves_budget_unexhausted(self, toy_plan):
        cand = backward_sweep(toy_plan, 3, 25.0)
        assert not cand.feasible
        assert cand.reason == REASON_UNDERSHOOT
        assert cand.t0 == 0
        # idle usage only: one calendar unit per period
        assert cand.total_usage_mwh == pytest.approx(3 * 50.0, abs=1.0)

    def test_zero_cost_concentrates_usage_latest(self):
        # Scarce budget at zero cost: the walk closes the budget deep in the
        # tail and the remaining head periods idle at their calendar floors.
        sto = StorageParams(usage_budget_mwh=600.0, calendar_usage_mwh=50.0,
                            soh_end_of_life=0.97, impedance_eol_ratio=1.15)
        plan = make_plan([checks._toy_day(2, 1.0), checks._toy_day(7, 1.2),
                          checks._toy_day(11, 1.4)], sto)
        free = backward_sweep(plan, 3, 0.0)
        assert free.feasible
        assert free.total_usage_mwh == pytest.approx(600.0, abs=1e-6)
        q = plan.q_period(1)
        active_free = sum(1 for p in free.periods if p.usage_mwh > q + 1.0)
        mid = backward_sweep(plan, 3, 17.0)
        if mid.feasible:
            active_mid = sum(1 for p in mid.periods if p.usage_mwh > q + 1.0)
            # Free usage exhausts the budget over the fewest active periods.
            assert active_free <= active_mid
        assert free.periods[0].usage_mwh == pytest.approx(q)  # head idles

    def test_pure_calendar_budget_closes_exactly(self):
        # Budget of exactly N calendar units: a prohibitive cost is feasible.
        sto = StorageParams(usage_budget_mwh=150.0, calendar_usage_mwh=50.0,
                            soh_end_of_life=0.97, impedance_eol_ratio=1.15)
        plan = make_plan([flat_day()] * 3, sto)
        cand = backward_sweep(plan, 3, 24.0)
        assert cand.feasible
        assert cand.total_usage_mwh == pytest.approx(150.0, abs=1e-6)
        assert [p.usage_mwh for p in cand.periods] == pytest.approx([50.0] * 3, abs=1e-6)

    def test_recursion_discounts_across_year_boundaries(self, toy_plan):
        cand = backward_sweep(toy_plan, 3, 20.0)  # undershoot but walks all periods
        cs = {p.t: p.c_usd_per_mwh for p in cand.periods}
        # Backward recursion divides by (1+r) across each year boundary and
        # adds the (nonnegative) SOH term.
        assert cs[3] == pytest.approx(20.0)
        assert cs[2] >= 20.0 / 1.07 - 1e-9
        assert cs[1] >= cs[2] / 1.07 - 1e-9
        assert cs[2] == pytest.approx(20.0 / 1.07, rel=0.02)

    def test_bad_args(self, toy_plan):
        with pytest.raises(ValueError):
            backward_sweep(toy_plan, 0, 1.0)
        with pytest.raises(ValueError):
            backward_sweep(toy_plan, 3, -1.0)


class TestOptimizeAgainstOracle:
    def test_objective_matches_brute_force(self, toy_optimized, toy_brute_force):
        rel = abs(toy_optimized.y_total_usd - toy_brute_force.y_usd) / toy_brute_force.y_usd
        assert rel <= 1e-3

    def test_cap_duals_match_costs(self, toy_plan, toy_optimized):
        active = toy_optimized.usage_mwh > toy_plan.q_period(1) + 1.0
        assert active.any()
        duals = toy_optimized.cap_duals[active]
        costs = toy_optimized.c_usd_per_mwh[active]
        assert np.all(np.abs(duals - costs) / costs <= 0.02)

    def test_budget_closure(self, toy_plan, toy_optimized):
        total = toy_optimized.usage_mwh.sum()
        assert total <= toy_plan.storage.usage_budget_mwh + 1e-6
        assert total >= toy_plan.storage.usage_budget_mwh - toy_plan.q_period(1)

    def test_forward_replay_reproduces_reported_y(self, toy_plan, toy_optimized):
        replay = evaluate_schedule(
            toy_plan,
            UsagePolicy(toy_optimized.usage_mwh, label="replay"),
            n_periods=toy_optimized.t_star,
        )
        assert replay.y_usd == pytest.approx(toy_optimized.y_life_usd, rel=1e-6)

    def test_abundant_budget_gives_zero_cost(self):
        # One period, budget far above anything the day can use.
        sto = StorageParams(usage_budget_mwh=5000.0, calendar_usage_mwh=50.0,
                            soh_end_of_life=0.97, impedance_eol_ratio=1.15)
        plan = make_plan([checks._toy_day(2, 1.0)], sto)
        schedule = optimize_mcd(plan, McdGrid(dc_usd_per_mwh=0.5, cmax_usd_per_mwh=10.0))
        assert schedule.c_seed == 0.0
        assert schedule.c_terminal == 0.0
        assert schedule.t_star == 1

    def test_scaling_costs_scales_mcd(self, toy_plan, toy_optimized):
        # Doubling every cost coefficient doubles the optimal cost schedule.
        scaled_periods = tuple(
            dataclasses.replace(
                p,
                gen=GenParams(capacity_mw=p.gen.capacity_mw,
                              a_usd_per_mw2h=2 * p.gen.a_usd_per_mw2h,
                              b_usd_per_mwh=2 * p.gen.b_usd_per_mwh),
                load=LoadParams(capacity_mw=p.load.capacity_mw,
                                a_usd_per_mw2h=2 * p.load.a_usd_per_mw2h,
                                b_usd_per_mwh=2 * p.load.b_usd_per_mwh),
            )
            for p in toy_plan.periods
        )
        plan2 = Plan(periods=scaled_periods, storage=toy_plan.storage, discount=toy_plan.discount)
        sched2 = optimize_mcd(plan2, McdGrid(dc_usd_per_mwh=0.1, cmax_usd_per_mwh=50.0))
        ratio = sched2.c_usd_per_mwh / toy_optimized.c_usd_per_mwh
        assert np.all(np.abs(ratio - 2.0) <= 0.03)


class TestEvaluateSchedule:
    def test_prohibitive_cost_equals_no_storage(self, toy_plan):
        base = no_storage_baseline(toy_plan)
        idle = evaluate_schedule(toy_plan, CostPolicy(np.full(3, 1e6), label="idle"))
        assert idle.y_usd == pytest.approx(base.y_usd, rel=1e-12)

    def test_calendar_only_policy_matches_idle(self, toy_plan):
        base = no_storage_baseline(toy_plan)
        q = toy_plan.q_period(1)
        res = evaluate_schedule(toy_plan, UsagePolicy(np.full(3, q), label="calendar"))
        assert res.y_usd == pytest.approx(base.y_usd, rel=1e-9)
        assert res.usage_mwh == pytest.approx([q] * 3)

    def test_zero_cost_truncates_at_budget(self, toy_plan):
        res = evaluate_schedule(toy_plan, CostPolicy(np.zeros(3), label="free"))
        budget = toy_plan.storage.usage_budget_mwh
        assert res.total_usage_mwh <= budget + 1e-6
        # At most one period's calendar usage can be stranded: a remainder
        # below the calendar floor retires the unit.
        assert budget - res.total_usage_mwh <= toy_plan.q_period(1) + 1e-6

    def test_energy_conservation_of_reported_costs(self, toy_plan):
        res = evaluate_schedule(toy_plan, CostPolicy(np.full(3, 17.0), label="priced"))
        deltas = np.array([toy_plan.discount.delta(t) for t in range(1, 4)])
        assert res.y_usd == pytest.approx(float(deltas @ res.period_costs_usd), rel=1e-12)

    def test_policy_validation(self, toy_plan):
        with pytest.raises(ValueError):
            CostPolicy(np.array([-1.0]))
        with pytest.raises(ValueError):
            evaluate_schedule(toy_plan, CostPolicy(np.zeros(3)), n_periods=9)


class TestBruteForce:
    def test_single_period_rich_budget_uses_unconstrained_optimum(self):
        sto = StorageParams(usage_budget_mwh=5000.0, calendar_usage_mwh=50.0,
                            soh_end_of_life=0.97, impedance_eol_ratio=1.15)
        plan = make_plan([checks._toy_day(2, 1.0)], sto)
        res = brute_force_long_term(plan, grid_points=30)
        from dispatch_mcd.horizon import _solve_period_priced
        _, u_free, _ = _solve_period_priced(plan, 1, 1.0, 0.0, None)
        assert res.realized_usage_mwh[0] == pytest.approx(u_free, rel=0.05)

    def test_two_identical_periods_split_symmetrically(self):
        day = checks._toy_day(3, 1.2)
        from dispatch_mcd.horizon import _solve_period_priced
        sto_probe = StorageParams(usage_budget_mwh=1e6, calendar_usage_mwh=50.0,
                                  soh_end_of_life=0.97, impedance_eol_ratio=1.15)
        probe = make_plan([day], sto_probe, rate=0.0)
        _, u_free, _ = _solve_period_priced(probe, 1, 1.0, 0.0, None)
        budget = u_free  # half of the combined unconstrained demand
        sto = StorageParams(usage_budget_mwh=budget, calendar_usage_mwh=50.0,
                            soh_end_of_life=0.9999, impedance_eol_ratio=1.0000001)
        plan = make_plan([day, day], sto, rate=0.0)
        res = brute_force_long_term(plan, grid_points=25)
        assert res.usage_caps_mwh[0] == pytest.approx(res.usage_caps_mwh[1], abs=budget / 24)

    def test_ascending_marginal_cost_concentrates_usage_late(self):
        # Three identical days, generator marginal cost rising per period and
        # no discounting: the tight budget should flow to the dearest period.
        day = checks._toy_day(4, 1.1)
        gens = [GenParams(b_usd_per_mwh=b) for b in (20.0, 50.0, 100.0)]
        sto = StorageParams(usage_budget_mwh=550.0, calendar_usage_mwh=50.0,
                            soh_end_of_life=0.97, impedance_eol_ratio=1.15)
        plan = make_plan([day] * 3, sto, rate=0.0, gens=gens)
        res = brute_force_long_term(plan, grid_points=21)
        assert np.argmax(res.usage_caps_mwh) == 2
        assert res.usage_caps_mwh[2] > res.usage_caps_mwh[0] + 100.0

    def test_size_caps(self, toy_plan):
        with pytest.raises(TooLargeError):
            brute_force_long_term(toy_plan, grid_points=80)
        sto = toy_plan.storage
        big = make_plan([flat_day()] * 5, sto)
        with pytest.raises(TooLargeError):
            brute_force_long_term(big, grid_points=10)
