"""Comparator policies for the life-cycle study.

Three ways people price storage degradation short of the full optimization:
a levelized cost of degradation amortized from capital cost (the common
industry shortcut), the optimized schedule with the health-sensitivity term
dropped, and no degradation price at all.  Each evaluates to a HorizonResult
on the same footing as the optimal schedule, so savings against the
no-storage baseline compare directly.
"""

from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from .degradation import StorageParams
from .horizon import (
    CostPolicy,
    DiscountModel,
    HorizonResult,
    McdGrid,
    McdSchedule,
    Plan,
    UsagePolicy,
    evaluate_schedule,
    no_storage_baseline,
    optimize_mcd,
)
from .qp import SolverSettings


@dataclasses.dataclass(frozen=True)
class CapitalParams:
    """Capital-cost inputs for the levelized degradation cost.

    ``design_throughput_mwh`` is the lifetime throughput the levelization
    spreads the depreciation over; when omitted it falls back to the storage
    unit's usage budget.  Keeping it explicit lets a compressed study budget
    coexist with the battery's design-basis amortization.
    """

    cost_usd_per_kwh: float = 200.0
    depreciation_ratio: float = 0.30
    amortization_years: int = 15
    design_throughput_mwh: Optional[float] = None

    def __post_init__(self):
        if self.cost_usd_per_kwh <= 0 or self.amortization_years <= 0:
            raise ValueError("capital cost and amortization years must be positive")
        if not (0.0 < self.depreciation_ratio <= 1.0):
            raise ValueError("depreciation ratio must be in (0, 1]")
        if self.design_throughput_mwh is not None and self.design_throughput_mwh <= 0:
            raise ValueError("design throughput must be positive")


def capital_recovery_factor(rate: float, years: int) -> float:
    """Annuity factor r(1+r)^n / ((1+r)^n - 1); 1/n at zero rate."""
    if years <= 0:
        raise ValueError("years must be positive")
    if rate == 0.0:
        return 1.0 / years
    growth = (1.0 + rate) ** years
    return rate * growth / (growth - 1.0)


def lcod_cost(
    capital: CapitalParams,
    storage: StorageParams,
    discount: DiscountModel,
) -> float:
    """Levelized cost of degradation in $/MWh-throughput.

    Annualized depreciable capital divided by annual throughput:
    capital * energy * ratio * CRF(r, years) / (throughput / years).
    The annuity form reproduces the published magnitude; straight-line
    amortization would land noticeably lower.
    """
    capital_usd = capital.cost_usd_per_kwh * storage.energy_capacity_mwh * 1000.0
    depreciable = capital_usd * capital.depreciation_ratio
    annualized = depreciable * capital_recovery_factor(discount.annual_rate, capital.amortization_years)
    throughput = capital.design_throughput_mwh or storage.usage_budget_mwh
    annual_throughput = throughput / capital.amortization_years
    return annualized / annual_throughput


def run_lcod(
    plan: Plan,
    capital: CapitalParams,
    settings: Optional[SolverSettings] = None,
) -> HorizonResult:
    """Dispatch the whole horizon at the constant levelized degradation cost."""
    level = lcod_cost(capital, plan.storage, plan.discount)
    policy = CostPolicy(np.full(plan.n_periods, level), label=f"lcod[{level:.2f}]")
    return evaluate_schedule(plan, policy, settings=settings)


def run_zero_cost(plan: Plan, settings: Optional[SolverSettings] = None) -> HorizonResult:
    """Free-usage dispatch: the unit runs hard and retires when spent."""
    policy = CostPolicy(np.zeros(plan.n_periods), label="zero-cost")
    return evaluate_schedule(plan, policy, settings=settings)


def run_no_soh_term(
    plan: Plan,
    grid: Optional[McdGrid] = None,
    settings: Optional[SolverSettings] = None,
    jobs: int = 1,
) -> tuple[McdSchedule, HorizonResult]:
    """Optimized schedule with the health-sensitivity term forced to zero."""
    schedule = optimize_mcd(plan, grid=grid, include_soh_term=False, settings=settings, jobs=jobs)
    result = evaluate_schedule(
        plan,
        UsagePolicy(schedule.usage_mwh, label="no-soh-term"),
        n_periods=plan.n_periods,
        settings=settings,
    )
    return schedule, result


def savings(baseline: HorizonResult, policy: HorizonResult) -> float:
    """Life-cycle cost saved by a policy against the no-storage baseline."""
    return baseline.y_usd - policy.y_usd


@dataclasses.dataclass
class PolicyComparison:
    baseline: HorizonResult
    optimal: HorizonResult
    optimal_schedule: McdSchedule
    lcod: HorizonResult
    lcod_value: float
    no_soh: HorizonResult
    no_soh_schedule: McdSchedule
    zero_cost: HorizonResult

    def savings_table(self) -> dict:
        base = self.baseline.y_usd
        rows = {}
        for name, res in (
            ("optimal_mcd", self.optimal),
            ("no_soh_term", self.no_soh),
            ("lcod", self.lcod),
            ("zero_cost", self.zero_cost),
        ):
            rows[name] = {
                "y_usd": res.y_usd,
                "savings_usd": base - res.y_usd,
                "savings_share_of_optimal": (
                    (base - res.y_usd) / (base - self.optimal.y_usd)
                    if base != self.optimal.y_usd
                    else float("nan")
                ),
            }
        rows["no_storage"] = {"y_usd": base, "savings_usd": 0.0, "savings_share_of_optimal": 0.0}
        return rows


def compare_policies(
    plan: Plan,
    capital: CapitalParams,
    grid: Optional[McdGrid] = None,
    settings: Optional[SolverSettings] = None,
    jobs: int = 1,
) -> PolicyComparison:
    """Run the full policy lineup on one plan."""
    baseline = no_storage_baseline(plan, settings=settings)
    schedule = optimize_mcd(plan, grid=grid, settings=settings, jobs=jobs)
    optimal = evaluate_schedule(
        plan,
        UsagePolicy(schedule.usage_mwh, label="optimal-mcd"),
        n_periods=plan.n_periods,
        settings=settings,
    )
    no_soh_schedule, no_soh = run_no_soh_term(plan, grid=grid, settings=settings, jobs=jobs)
    return PolicyComparison(
        baseline=baseline,
        optimal=optimal,
        optimal_schedule=schedule,
        lcod=run_lcod(plan, capital, settings=settings),
        lcod_value=lcod_cost(capital, plan.storage, plan.discount),
        no_soh=no_soh,
        no_soh_schedule=no_soh_schedule,
        zero_cost=run_zero_cost(plan, settings=settings),
    )
