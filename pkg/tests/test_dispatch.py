"""Daily dispatch QP: analytic cases, model invariants, and the duality
identities the long-term layer depends on."""

import dataclasses

import numpy as np
import pytest

from dispatch_mcd.degradation import SohState, StorageParams
from dispatch_mcd.dispatch import (
    CAP_LABEL,
    CapInactiveError,
    ConstrainedUsage,
    DayProfile,
    DegradationCost,
    DispatchInstance,
    GenParams,
    LoadParams,
    build_problem_a,
    build_problem_c,
    marginal_usage_value,
    soh_sensitivity,
    solve_dispatch,
)

GEN = GenParams(capacity_mw=100.0, a_usd_per_mw2h=0.1, b_usd_per_mwh=30.0)
LOAD = LoadParams(capacity_mw=10.0, a_usd_per_mw2h=0.1, b_usd_per_mwh=70.0)
WIDE_LOAD = LoadParams(capacity_mw=30.0, a_usd_per_mw2h=0.1, b_usd_per_mwh=70.0)
STO = StorageParams()
FRESH = SohState(soh=1.0)


def one_hour_day(load_mw: float, wind_mwh: float = 0.0) -> DayProfile:
    load = np.zeros(24)
    wind = np.zeros(24)
    load[0] = load_mw
    wind[0] = wind_mwh
    return DayProfile(wind_mwh=wind, load_mw=load)


def arbitrage_day(seed=0, spread=1.0) -> DayProfile:
    """Windy nights, loaded evenings: plenty of storage value."""
    rng = np.random.default_rng(seed)
    h = np.arange(24)
    load = 57 * (1 + 0.35 * spread * np.sin(2 * np.pi * (h - 17) / 24)) + rng.normal(0, 1.5, 24)
    wind = 60 * (1 + 0.6 * np.sin(2 * np.pi * (h - 2) / 24)) + rng.normal(0, 5, 24)
    return DayProfile(wind_mwh=np.clip(wind, 0, 95), load_mw=np.clip(load, 0, None))


def instance(day, mode, gen=GEN, load=LOAD, soh=FRESH, storage=STO):
    return DispatchInstance(gen=gen, load=load, storage=storage, day=day, soh=soh, mode=mode)


def assert_solution_invariants(inst, sol, simultaneity=True):
    r = inst.derated()
    dt = inst.day.dt_h
    assert np.all(sol.gen_mw <= inst.gen.capacity_mw + 1e-7)
    assert np.all(sol.load_reduction_mw <= inst.load.capacity_mw + 1e-7)
    assert np.all(sol.discharge_mw <= r.power_capacity_mw + 1e-7)
    assert np.all(sol.charge_mw <= r.power_capacity_mw + 1e-7)
    assert np.all(sol.energy_mwh <= r.energy_capacity_mwh + 1e-6)
    assert np.all(sol.energy_mwh >= -1e-6)
    keep = 1.0 - inst.storage.self_discharge_per_hour
    recon = (
        sol.energy_mwh[1:]
        - keep * sol.energy_mwh[:-1]
        + sol.discharge_mw * dt / r.efficiency
        - sol.charge_mw * dt * r.efficiency
    )
    assert np.max(np.abs(recon)) <= 1e-6, "energy recursion residual too large"
    assert abs(sol.energy_mwh[0] - sol.energy_mwh[-1]) <= 1e-6, "period endpoints differ"
    balance = (sol.gen_mw + sol.discharge_mw - sol.charge_mw + sol.load_reduction_mw) * dt \
        + inst.day.wind_mwh - inst.day.load_mw * dt
    assert np.min(balance) >= -1e-6, "power balance violated"
    if simultaneity:
        assert np.max(np.minimum(sol.discharge_mw, sol.charge_mw)) <= 1e-4


class TestAnalyticCases:
    def test_interior_generation_split(self):
        # Marginal generation 30 + 0.2*60 = 42 < 70, so no load reduction.
        inst = instance(one_hour_day(60.0), ConstrainedUsage(u_mwh=STO.calendar_usage_mwh))
        sol = solve_dispatch(inst)
        assert sol.gen_mw[0] == pytest.approx(60.0, abs=1e-7)
        assert sol.load_reduction_mw[0] == pytest.approx(0.0, abs=1e-8)
        assert sol.system_cost_usd == pytest.approx(2160.0, rel=1e-6)
        assert sol.usage_mwh == pytest.approx(STO.calendar_usage_mwh)

    def test_capped_generation_forces_load_reduction(self):
        # 120 MW of load: generation caps at 100, reduction covers 20.
        inst = instance(one_hour_day(120.0), ConstrainedUsage(u_mwh=STO.calendar_usage_mwh),
                        load=WIDE_LOAD)
        sol = solve_dispatch(inst)
        assert sol.gen_mw[0] == pytest.approx(100.0, abs=1e-7)
        assert sol.load_reduction_mw[0] == pytest.approx(20.0, abs=1e-7)
        assert sol.system_cost_usd == pytest.approx(5440.0, rel=1e-6)

    def test_surplus_wind_costs_nothing(self):
        day = DayProfile(wind_mwh=np.full(24, 90.0), load_mw=np.full(24, 50.0))
        inst = instance(day, ConstrainedUsage(u_mwh=STO.calendar_usage_mwh))
        sol = solve_dispatch(inst)
        assert sol.system_cost_usd == pytest.approx(0.0, abs=1e-7)
        assert np.max(np.abs(sol.gen_mw)) <= 1e-8

    def test_surplus_wind_priced_storage_idles(self):
        day = DayProfile(wind_mwh=np.full(24, 90.0), load_mw=np.full(24, 50.0))
        inst = instance(day, DegradationCost(c_usd_per_mwh=5.0))
        sol = solve_dispatch(inst)
        assert np.max(sol.discharge_mw + sol.charge_mw) <= 1e-7
        assert sol.objective_usd == pytest.approx(5.0 * STO.calendar_usage_mwh, rel=1e-9)


class TestBuilders:
    def test_cap_row_right_hand_side(self):
        inst = instance(arbitrage_day(), ConstrainedUsage(u_mwh=1250.0))
        prob = build_problem_a(inst)
        row = list(prob.ineq_labels).index(CAP_LABEL)
        assert prob.b[row] == pytest.approx(1200.0)
        assert prob.A[row, 48:96] == pytest.approx(1.0)
        assert np.all(prob.A[row, :48] == 0.0) and np.all(prob.A[row, 96:] == 0.0)

    def test_cap_at_calendar_floor_forces_idle(self):
        inst = instance(arbitrage_day(), ConstrainedUsage(u_mwh=STO.calendar_usage_mwh))
        sol = solve_dispatch(inst)
        assert np.max(sol.discharge_mw + sol.charge_mw) <= 1e-7

    def test_cap_below_calendar_rejected(self):
        with pytest.raises(ValueError):
            build_problem_a(instance(arbitrage_day(), ConstrainedUsage(u_mwh=10.0)))

    def test_problem_c_zero_price_matches_uncapped_a(self):
        day = arbitrage_day()
        sol_c = solve_dispatch(instance(day, DegradationCost(c_usd_per_mwh=0.0)))
        sol_a = solve_dispatch(instance(day, ConstrainedUsage(u_mwh=1e7)))
        assert sol_c.system_cost_usd == pytest.approx(sol_a.system_cost_usd, rel=1e-7)

    def test_problem_c_constant_term(self):
        # Idle storage still pays the calendar term: J = f + c*q.
        day = DayProfile(wind_mwh=np.full(24, 90.0), load_mw=np.full(24, 50.0))
        sol = solve_dispatch(instance(day, DegradationCost(c_usd_per_mwh=10.0)))
        assert sol.degradation_term_usd == pytest.approx(500.0, rel=1e-9)

    def test_huge_price_idles_storage(self):
        sol = solve_dispatch(instance(arbitrage_day(), DegradationCost(c_usd_per_mwh=1e6)))
        assert np.max(sol.discharge_mw + sol.charge_mw) <= 1e-9

    def test_objective_decomposition_mode_c(self):
        inst = instance(arbitrage_day(), DegradationCost(c_usd_per_mwh=5.0))
        sol = solve_dispatch(inst)
        assert sol.objective_usd == pytest.approx(
            sol.system_cost_usd + 5.0 * sol.usage_mwh, rel=1e-9
        )


class TestSolutionInvariants:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_mode_c_invariants(self, seed):
        inst = instance(arbitrage_day(seed), DegradationCost(c_usd_per_mwh=4.0))
        sol = solve_dispatch(inst)
        assert_solution_invariants(inst, sol)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_mode_a_invariants(self, seed):
        inst = instance(arbitrage_day(seed), ConstrainedUsage(u_mwh=400.0))
        sol = solve_dispatch(inst)
        assert_solution_invariants(inst, sol)
        assert sol.usage_mwh <= 400.0 + 1e-6

    def test_derated_limits_respected(self):
        inst = instance(arbitrage_day(1), DegradationCost(c_usd_per_mwh=2.0),
                        soh=SohState(soh=0.75, cumulative_usage_mwh=1e6))
        sol = solve_dispatch(inst)
        assert_solution_invariants(inst, sol)
        r = inst.derated()
        assert r.power_capacity_mw < 30.0
        assert np.all(sol.discharge_mw <= r.power_capacity_mw + 1e-7)


class TestMarginalUsageValue:
    def test_slack_cap_returns_zero(self):
        inst = instance(arbitrage_day(), ConstrainedUsage(u_mwh=1e6))
        assert marginal_usage_value(inst) == pytest.approx(0.0, abs=1e-9)

    def test_slack_cap_strict_raises(self):
        inst = instance(arbitrage_day(), ConstrainedUsage(u_mwh=1e6))
        with pytest.raises(CapInactiveError):
            marginal_usage_value(inst, strict=True)

    @pytest.mark.parametrize("u", [200.0, 300.0, 400.0])
    def test_dual_matches_finite_difference(self, u):
        day = arbitrage_day(2)
        lam = marginal_usage_value(instance(day, ConstrainedUsage(u_mwh=u)))
        assert lam > 0.1
        delta = 1.0
        costs = {}
        for sign in (+1, -1):
            sol = solve_dispatch(instance(day, ConstrainedUsage(u_mwh=u + sign * delta)))
            costs[sign] = sol.system_cost_usd
        fd = (costs[+1] - costs[-1]) / (2 * delta)
        assert -fd == pytest.approx(lam, rel=1e-3)

    def test_nested_caps_have_ordered_duals(self):
        day = arbitrage_day(3)
        lam_tight = marginal_usage_value(instance(day, ConstrainedUsage(u_mwh=300.0)))
        lam_loose = marginal_usage_value(instance(day, ConstrainedUsage(u_mwh=600.0)))
        assert lam_tight >= lam_loose - 1e-9

    def test_monotone_cost_in_cap(self):
        day = arbitrage_day(4)
        costs = [
            solve_dispatch(instance(day, ConstrainedUsage(u_mwh=u))).system_cost_usd
            for u in (100.0, 250.0, 400.0, 700.0, 1100.0)
        ]
        assert all(a >= b - 1e-7 for a, b in zip(costs, costs[1:]))


class TestSohSensitivity:
    def test_idle_storage_insensitive(self):
        inst = instance(arbitrage_day(), DegradationCost(c_usd_per_mwh=1e6),
                        soh=SohState(soh=0.9))
        sens = soh_sensitivity(inst)
        assert sens.method == "central"
        assert sens.value_usd_per_soh == pytest.approx(0.0, abs=1e-6)

    def test_active_storage_benefits_from_health(self):
        inst = instance(arbitrage_day(1, spread=1.4), DegradationCost(c_usd_per_mwh=1.0),
                        soh=SohState(soh=0.8))
        sens = soh_sensitivity(inst)
        assert sens.value_usd_per_soh < -1.0

    def test_step_halving_is_stable(self):
        inst = instance(arbitrage_day(1, spread=1.4), DegradationCost(c_usd_per_mwh=1.0),
                        soh=SohState(soh=0.8))
        a = soh_sensitivity(inst, step=1e-4).value_usd_per_soh
        b = soh_sensitivity(inst, step=5e-5).value_usd_per_soh
        assert b == pytest.approx(a, rel=0.01)

    def test_boundary_uses_one_sided(self):
        inst = instance(arbitrage_day(1), DegradationCost(c_usd_per_mwh=1.0), soh=FRESH)
        sens = soh_sensitivity(inst)
        assert sens.method == "backward"
        inst_lo = instance(arbitrage_day(1), DegradationCost(c_usd_per_mwh=1.0),
                           soh=SohState(soh=STO.soh_end_of_life))
        assert soh_sensitivity(inst_lo).method == "forward"

    def test_monotone_cost_in_soh(self):
        day = arbitrage_day(5, spread=1.3)
        costs = [
            solve_dispatch(instance(day, ConstrainedUsage(u_mwh=600.0), soh=SohState(soh=h))).system_cost_usd
            for h in (0.72, 0.79, 0.86, 0.93, 1.0)
        ]
        assert all(a >= b - 1e-6 for a, b in zip(costs, costs[1:]))


class TestEquivalence:
    """Pricing usage at c and capping usage at the priced optimum's level
    give the same dispatch (same feasible set, same system cost)."""

    @pytest.mark.parametrize("seed,price", [(0, 2.0), (1, 5.0), (2, 8.0), (3, 12.0), (4, 3.0)])
    def test_problem_a_at_priced_usage_matches(self, seed, price):
        day = arbitrage_day(seed)
        sol_c = solve_dispatch(instance(day, DegradationCost(c_usd_per_mwh=price)))
        sol_a = solve_dispatch(instance(day, ConstrainedUsage(u_mwh=sol_c.usage_mwh)))
        assert sol_a.system_cost_usd == pytest.approx(sol_c.system_cost_usd, rel=1e-5)
        assert sol_a.usage_mwh == pytest.approx(sol_c.usage_mwh, rel=1e-5)

    def test_cap_dual_consistent_with_price(self):
        # At the priced optimum's usage, the cap's dual recovers the price,
        # provided the price lands in a smooth (strictly convex) stretch of
        # F(u) rather than on a kink where usage jumps.
        day = arbitrage_day(2)
        price = 16.5
        sol_c = solve_dispatch(instance(day, DegradationCost(c_usd_per_mwh=price)))
        assert sol_c.usage_mwh > STO.calendar_usage_mwh + 10.0
        lam = marginal_usage_value(instance(day, ConstrainedUsage(u_mwh=sol_c.usage_mwh)))
        assert lam == pytest.approx(price, rel=0.02)


class TestWarmStart:
    def test_warm_from_reference_is_fast_and_agrees(self):
        day = arbitrage_day(2)
        inst = instance(day, DegradationCost(c_usd_per_mwh=3.0), soh=SohState(soh=0.9))
        base = solve_dispatch(inst)
        inst2 = dataclasses.replace(inst, soh=SohState(soh=0.8999))
        warm = solve_dispatch(inst2, warm_from=base)
        cold = solve_dispatch(inst2)
        assert warm.system_cost_usd == pytest.approx(cold.system_cost_usd, rel=1e-7)
        assert warm.iterations <= 20


class TestUsagePriceLadder:
    def test_priced_usage_nonincreasing_in_price(self):
        day = arbitrage_day(1)
        usages = [
            solve_dispatch(instance(day, DegradationCost(c_usd_per_mwh=c))).usage_mwh
            for c in (0.0, 8.0, 16.0, 18.0, 25.0)
        ]
        assert all(a >= b - 1e-6 for a, b in zip(usages, usages[1:]))
