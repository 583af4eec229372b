"""Long-term layer: optimal marginal degradation cost over the storage life.

The lifetime problem allocates a throughput budget across dispatch periods to
minimize discounted system cost.  Its optimality conditions say each period
should price storage usage at a time-varying marginal degradation cost (MCD):
a terminal constant escalated by the discount factor plus a term carrying the
value of the health the usage destroys.  This module implements

* the one-step backward MCD recursion,
* the backward sweep that, from an assumed end-of-life period and terminal
  cost, reconstructs the whole cost/usage/SOH path back to period 1,
* the grid search over (end period, terminal cost) candidates,
* forward policy evaluation (cost or usage policies, with budget truncation
  and retirement), and
* an exhaustive brute-force oracle for tiny horizons, used by the test suite.

A ``Plan`` is the package's internal description of the whole horizon: one
dispatch day per period, each representing ``weight_days`` calendar days
(usage and calendar degradation scale by the weight; discounting follows the
calendar year of the period).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Optional, Sequence, Union

import numpy as np

from .degradation import SohState, StorageParams
from .dispatch import (
    ConstrainedUsage,
    DayProfile,
    DegradationCost,
    DispatchInstance,
    DispatchSolution,
    GenParams,
    LoadParams,
    soh_sensitivity,
    solve_dispatch,
)
from .qp import SolverSettings

logger = logging.getLogger(__name__)


class HorizonError(Exception):
    pass


class NoFeasibleCandidateError(HorizonError):
    """No (end period, terminal cost) pair on the grid closes the budget."""


class TooLargeError(HorizonError):
    """Brute-force oracle asked to enumerate beyond its size caps."""


# Rejection reasons carried by infeasible sweep candidates.
REASON_BUDGET_MISMATCH = "BudgetMismatch"  # budget below the calendar obligations
REASON_UNDERSHOOT = "BudgetUnexhausted"  # walk hit period 1 with leftover budget


@dataclasses.dataclass(frozen=True)
class DiscountModel:
    """Yearly discounting indexed by the calendar year of each period."""

    annual_rate: float = 0.07
    periods_per_year: int = 365

    def __post_init__(self):
        if self.annual_rate < 0:
            raise ValueError("discount rate must be nonnegative")
        if self.periods_per_year < 1:
            raise ValueError("periods_per_year must be at least 1")

    def year_index(self, period: int) -> int:
        """Year number of a 1-based period index, starting at 0."""
        return (period - 1) // self.periods_per_year

    def delta(self, period: int) -> float:
        return 1.0 / (1.0 + self.annual_rate) ** self.year_index(period)

    def ratio(self, period: int) -> float:
        """delta(period) / delta(period - 1), in (0, 1]."""
        return self.delta(period) / self.delta(period - 1)


@dataclasses.dataclass(frozen=True)
class PeriodSpec:
    """One dispatch period: a representative day and its system parameters."""

    day: DayProfile
    gen: GenParams
    load: LoadParams
    weight_days: float = 1.0
    profile_key: int = 0  # identifies (day, gen, load) for caching idle costs

    def __post_init__(self):
        if self.weight_days < 1.0:
            raise ValueError("a period must represent at least one day")


@dataclasses.dataclass(frozen=True)
class Plan:
    """The whole evaluation horizon plus storage and discounting."""

    periods: tuple
    storage: StorageParams
    discount: DiscountModel

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(self.periods))
        if not self.periods:
            raise ValueError("plan needs at least one period")

    @property
    def n_periods(self) -> int:
        return len(self.periods)

    def spec(self, t: int) -> PeriodSpec:
        """Period spec for 1-based period index t."""
        return self.periods[t - 1]

    def q_period(self, t: int) -> float:
        return self.storage.calendar_usage_mwh * self.spec(t).weight_days


@dataclasses.dataclass(frozen=True)
class CostPolicy:
    """Per-period degradation price, $/MWh-throughput."""

    values: np.ndarray
    label: str = "cost-policy"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("policy needs at least one period")
        if np.any(self.values < 0):
            raise ValueError("degradation prices must be nonnegative")


@dataclasses.dataclass(frozen=True)
class UsagePolicy:
    """Per-period usage caps in MWh (period units, calendar included)."""

    values: np.ndarray
    label: str = "usage-policy"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("policy needs at least one period")
        if np.any(self.values < 0):
            raise ValueError("usage caps must be nonnegative")


Policy = Union[CostPolicy, UsagePolicy]


@dataclasses.dataclass
class HorizonResult:
    """Forward simulation outcome over the horizon."""

    y_usd: float
    period_costs_usd: np.ndarray  # raw system cost per period (weighted)
    usage_mwh: np.ndarray  # realized usage per period (0 after retirement)
    soh: np.ndarray  # start-of-period SOH, length n+1 (final state appended)
    cap_duals: np.ndarray  # mode-A dual per period, NaN where priced/idle
    retired_at: Optional[int]  # first period with the unit retired, 1-based
    label: str

    @property
    def total_usage_mwh(self) -> float:
        return float(self.usage_mwh.sum())


class _IdleCosts:
    """Per-profile-key cache of the no-storage day cost."""

    def __init__(self, plan: Plan, settings: Optional[SolverSettings]):
        self.plan = plan
        self.settings = settings
        self._costs: dict[int, float] = {}

    def day_cost(self, t: int) -> float:
        spec = self.plan.spec(t)
        key = spec.profile_key
        if key not in self._costs:
            inst = DispatchInstance(
                gen=spec.gen,
                load=spec.load,
                storage=self.plan.storage,
                day=spec.day,
                soh=SohState(soh=self.plan.storage.soh_initial),
                mode=ConstrainedUsage(u_mwh=self.plan.storage.calendar_usage_mwh),
            )
            self._costs[key] = solve_dispatch(inst, settings=self.settings).system_cost_usd
        return self._costs[key]

    def period_cost(self, t: int) -> float:
        return self.day_cost(t) * self.plan.spec(t).weight_days


def _period_instance(plan: Plan, t: int, soh_value: float, mode) -> DispatchInstance:
    spec = plan.spec(t)
    return DispatchInstance(
        gen=spec.gen,
        load=spec.load,
        storage=plan.storage,
        day=spec.day,
        soh=SohState(soh=soh_value),
        mode=mode,
    )


def _solve_period_priced(plan, t, soh_value, price, settings) -> tuple[DispatchSolution, float, float]:
    """Solve the priced day; return (solution, period usage, period cost)."""
    w = plan.spec(t).weight_days
    sol = solve_dispatch(_period_instance(plan, t, soh_value, DegradationCost(price)), settings=settings)
    return sol, sol.usage_mwh * w, sol.system_cost_usd * w


def _solve_period_capped(plan, t, soh_value, u_period, settings, warm_from=None):
    """Solve the capped day; the cap is the period usage split over the weight."""
    w = plan.spec(t).weight_days
    inst = _period_instance(plan, t, soh_value, ConstrainedUsage(u_mwh=u_period / w))
    sol = solve_dispatch(inst, settings=settings, warm_from=warm_from)
    return sol, sol.usage_mwh * w, sol.system_cost_usd * w


def mcd_recursion_step(
    c_next: float,
    dF_dH_next: float,
    delta_ratio: float,
    params: StorageParams,
) -> float:
    """One backward step of the marginal-degradation-cost evolution.

    ``delta_ratio`` is the discount ratio between the later and the earlier
    period (1 within a year, 1/(1+r) across a year boundary).  The health
    sensitivity enters through the SOH lost per MWh of usage.  Negative
    outputs (finite-difference noise) are clamped to zero with a warning.
    """
    if c_next < 0:
        raise ValueError("later-period cost must be nonnegative")
    if not (0.0 < delta_ratio <= 1.0):
        raise ValueError("discount ratio must lie in (0, 1]")
    value = delta_ratio * (c_next - dF_dH_next * params.soh_per_mwh)
    if value < 0:
        logger.warning("MCD recursion produced %.3e; clamping to 0", value)
        return 0.0
    return value


@dataclasses.dataclass
class SweepPeriod:
    t: int
    c_usd_per_mwh: float
    usage_mwh: float
    soh_start: float
    cost_usd: float
    dF_dH: float
    cap_dual: float
    truncated: bool = False


@dataclasses.dataclass
class SweepCandidate:
    """Outcome of one backward sweep for a (T', terminal cost) pair."""

    t_prime: int
    c_seed: float
    feasible: bool
    t0: int
    reason: Optional[str]  # None when feasible
    periods: list  # SweepPeriod, ordered t = t0 .. T'
    y_backward_usd: float  # discounted cost over the walked periods
    closure_gap_mwh: float  # positive = leftover budget at period 1
    total_usage_mwh: float

    @property
    def usage_schedule(self) -> np.ndarray:
        return np.array([p.usage_mwh for p in self.periods])

    @property
    def cost_schedule(self) -> np.ndarray:
        return np.array([p.c_usd_per_mwh for p in self.periods])


def backward_sweep(
    plan: Plan,
    t_prime: int,
    c_seed: float,
    include_soh_term: bool = True,
    fd_step: float = 1e-4,
    settings: Optional[SolverSettings] = None,
) -> SweepCandidate:
    """Walk periods backward from an assumed end of life at ``t_prime``.

    Starting from end-of-life SOH after ``t_prime``, each step solves the
    priced dispatch, backs the SOH up by the resulting usage, evaluates the
    capped dispatch and its health sensitivity at the corrected SOH, and
    chains the cost recursion.

    Budget closure: each untouched earlier period still owes its calendar
    usage, so the walk may spend at most the budget minus those floors.  The
    period in which the budget closes has its usage truncated to fit, and any
    earlier periods idle at exactly their calendar usage (the optimality
    conditions allow idle periods explicitly).  A candidate is rejected when
    even the calendar floors do not fit (budget mismatch) or when the walk
    reaches period 1 with more than one period's usage left over; a zero-cost
    seed over the full horizon is accepted with any leftover budget, since a
    slack budget prices scarcity at zero.
    """
    sto = plan.storage
    if not (1 <= t_prime <= plan.n_periods):
        raise ValueError(f"t_prime {t_prime} outside 1..{plan.n_periods}")
    if c_seed < 0:
        raise ValueError("terminal cost must be nonnegative")
    h0 = sto.soh_initial
    k = sto.soh_per_mwh
    h_next = sto.soh_end_of_life  # SOH entering period t+1
    c_cur = float(c_seed)
    walked: list[SweepPeriod] = []
    # Calendar owed by periods 1..t-1 if the walk stops at period t.
    head_floor = np.concatenate([[0.0], np.cumsum([plan.q_period(t) for t in range(1, t_prime + 1)])])

    def finish(feasible, t0, reason, gap):
        walked.sort(key=lambda p: p.t)
        y = sum(plan.discount.delta(p.t) * p.cost_usd for p in walked)
        total = sum(p.usage_mwh for p in walked)
        return SweepCandidate(
            t_prime=t_prime,
            c_seed=c_seed,
            feasible=feasible,
            t0=t0,
            reason=reason,
            periods=walked,
            y_backward_usd=y,
            closure_gap_mwh=gap,
            total_usage_mwh=total,
        )

    def record(t, usage, soh_start, cost, dfdh, dual, truncated=False):
        walked.append(
            SweepPeriod(
                t=t,
                c_usd_per_mwh=c_cur,
                usage_mwh=usage,
                soh_start=soh_start,
                cost_usd=cost,
                dF_dH=dfdh,
                cap_dual=dual,
                truncated=truncated,
            )
        )

    def idle_head(upto: int) -> None:
        """Fill periods upto..1 with calendar-idle entries, recursing the cost."""
        nonlocal c_cur
        for tau in range(upto, 0, -1):
            soh_start = h0 - k * head_floor[tau - 1]
            sol, u_real, cost = _solve_period_capped(
                plan, tau, soh_start, plan.q_period(tau), settings
            )
            record(tau, plan.q_period(tau), soh_start, cost, 0.0,
                   float(sol.cap_dual_usd_per_mwh))
            if tau > 1:
                c_cur = mcd_recursion_step(c_cur, 0.0, plan.discount.ratio(tau), sto)

    for t in range(t_prime, 0, -1):
        sol_c, u_t, _ = _solve_period_priced(plan, t, h_next, c_cur, settings)
        h_t = h_next + k * u_t
        soh_budget_cap = h0 - k * head_floor[t - 1]
        if h_t >= soh_budget_cap - 1e-12:
            # The budget closes inside period t once the head's calendar
            # floors are reserved; truncate here and idle the head.
            u_trunc = (soh_budget_cap - h_next) / k
            if u_trunc < plan.q_period(t) - 1e-9:
                return finish(False, t, REASON_BUDGET_MISMATCH, 0.0)
            sol_a, _, cost = _solve_period_capped(
                plan, t, soh_budget_cap, u_trunc, settings, warm_from=sol_c
            )
            if include_soh_term and t > 1:
                sens = soh_sensitivity(
                    _period_instance(
                        plan, t, soh_budget_cap,
                        ConstrainedUsage(u_mwh=u_trunc / plan.spec(t).weight_days),
                    ),
                    step=fd_step,
                    settings=settings,
                    warm_from=sol_a,
                )
                dfdh = sens.value_usd_per_soh * plan.spec(t).weight_days
            else:
                dfdh = 0.0
            record(t, u_trunc, soh_budget_cap, cost, dfdh,
                   float(sol_a.cap_dual_usd_per_mwh), truncated=True)
            if t > 1:
                c_cur = mcd_recursion_step(c_cur, dfdh, plan.discount.ratio(t), sto)
                idle_head(t - 1)
            return finish(True, 1, None, 0.0)
        sol_a, _, cost = _solve_period_capped(plan, t, h_t, u_t, settings, warm_from=sol_c)
        if include_soh_term:
            sens = soh_sensitivity(
                _period_instance(plan, t, h_t, ConstrainedUsage(u_mwh=u_t / plan.spec(t).weight_days)),
                step=fd_step,
                settings=settings,
                warm_from=sol_a,
            )
            dfdh = sens.value_usd_per_soh * plan.spec(t).weight_days
        else:
            dfdh = 0.0
        record(t, u_t, h_t, cost, dfdh, float(sol_a.cap_dual_usd_per_mwh))
        if t > 1:
            c_cur = mcd_recursion_step(c_cur, dfdh, plan.discount.ratio(t), sto)
        h_next = h_t

    # Reached period 1 without closing the budget.
    gap = (h0 - h_next) / k
    u1 = walked[-1].usage_mwh if walked else 0.0  # period 1 is appended last
    slack_ok = c_seed == 0.0 and t_prime == plan.n_periods
    if gap <= u1 + 1e-6 or slack_ok:
        return finish(True, 1, None, gap)
    return finish(False, 0, REASON_UNDERSHOOT, gap)


@dataclasses.dataclass(frozen=True)
class McdGrid:
    """Grid-search settings for the (end period, terminal cost) scan.

    ``refine_splits`` adds a final pass at a fraction of the price step
    around the best grid candidate, sharpening the budget closure (and with
    it the match between recursion costs and cap duals) beyond the raw grid.
    """

    dc_usd_per_mwh: float = 0.25
    cmax_usd_per_mwh: float = 30.0
    tprimes: Optional[tuple] = None  # default: year-end periods
    refine_splits: int = 5

    def __post_init__(self):
        if self.dc_usd_per_mwh <= 0:
            raise ValueError("price step must be positive")
        if self.cmax_usd_per_mwh < 0:
            raise ValueError("price ceiling must be nonnegative")
        if self.refine_splits < 1:
            raise ValueError("refine_splits must be at least 1")

    def c_values(self) -> np.ndarray:
        n = int(math.floor(self.cmax_usd_per_mwh / self.dc_usd_per_mwh + 1e-9))
        return np.round(np.arange(n + 1) * self.dc_usd_per_mwh, 12)

    def tprime_values(self, plan: Plan) -> tuple:
        if self.tprimes is not None:
            vals = tuple(int(t) for t in self.tprimes)
        else:
            p = plan.discount.periods_per_year
            vals = tuple(t for t in range(p, plan.n_periods + 1, p))
            if not vals or vals[-1] != plan.n_periods:
                vals = vals + (plan.n_periods,)
        for t in vals:
            if not (1 <= t <= plan.n_periods):
                raise ValueError(f"end-period candidate {t} outside horizon")
        return vals


@dataclasses.dataclass
class McdSchedule:
    """Optimal MCD schedule and its life-cycle bookkeeping."""

    c_usd_per_mwh: np.ndarray  # per period, 1..T*
    c_terminal: float  # terminal constant (seed discounted back to year 0)
    c_seed: float  # raw terminal cost at T*
    t_star: int
    soh: np.ndarray  # start-of-period SOH, length T*+1
    usage_mwh: np.ndarray
    period_costs_usd: np.ndarray
    cap_duals: np.ndarray
    y_life_usd: float  # discounted cost over 1..T*
    y_total_usd: float  # plus the no-storage tail through the horizon
    candidates: list  # (t_prime, c_seed, feasible, reason, y_total or nan)
    include_soh_term: bool


def _idle_tail_costs(plan: Plan, idle: _IdleCosts) -> np.ndarray:
    """tail[t] = discounted no-storage cost of periods t+1..N (0-based t)."""
    n = plan.n_periods
    tail = np.zeros(n + 2)
    for t in range(n, 0, -1):
        tail[t] = tail[t + 1] + plan.discount.delta(t) * idle.period_cost(t)
    return tail


def _scan_tprime(
    plan: Plan,
    grid: McdGrid,
    t_prime: int,
    include_soh_term: bool,
    fd_step: float,
    settings: Optional[SolverSettings],
) -> list:
    """Feasible sweep candidates for one end period, best region resolved.

    Feasibility along the terminal-cost axis is an interval: below it the
    budget runs out before period 1 (usage too high), above it too much
    budget is left over.  Both edges are found by bisection (total backward
    usage falls as the cost rises).  Inside the interval every candidate
    closes the budget, so they compete on cost alone; the interval is probed
    coarsely and the best region refined to grid resolution rather than
    sweeping hundreds of grid points.
    """
    cs = grid.c_values()
    kmax = len(cs) - 1
    results: dict[float, SweepCandidate] = {}

    def sweep_c(c: float) -> SweepCandidate:
        key = round(float(c), 9)
        if key not in results:
            results[key] = backward_sweep(
                plan, t_prime, key,
                include_soh_term=include_soh_term, fd_step=fd_step, settings=settings,
            )
        return results[key]

    def sweep_at(k: int) -> SweepCandidate:
        return sweep_c(cs[k])

    def classify_cand(cand: SweepCandidate) -> str:
        if cand.feasible:
            return "feasible"
        return "over" if cand.reason == REASON_BUDGET_MISMATCH else "under"

    def classify(k: int) -> str:
        return classify_cand(sweep_at(k))

    bottom = classify(0)
    if bottom == "over":
        # Even with every later period maximally used the calendar floors do
        # not fit this end period; the cost axis cannot change that.
        return []
    if bottom == "under":
        # Free usage cannot approach the budget by this end period.
        return []

    # Upper feasibility edge: last index before undershoot takes over.
    if classify(kmax) != "under":
        k_hi = kmax
    else:
        lo, hi = 0, kmax
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if classify(mid) == "under":
                hi = mid
            else:
                lo = mid
        k_hi = lo
    if classify(k_hi) != "feasible":
        # The feasible window sits between grid points; bisect continuously
        # (closure tolerances guarantee it has positive width).
        c_low, c_high = float(cs[k_hi]), float(cs[min(k_hi + 1, kmax)])
        hit = None
        for _ in range(40):
            mid = 0.5 * (c_low + c_high)
            cand = sweep_c(mid)
            cls = classify_cand(cand)
            if cls == "feasible":
                hit = cand
                break
            if cls == "under":
                c_high = mid
            else:
                c_low = mid
            if c_high - c_low <= 1e-7:
                break
        if hit is None:
            return []
        width = max(c_high - c_low, 1e-4)
        for frac in (-1.0, -0.5, 0.5, 1.0):
            c_try = hit.c_seed + frac * width
            if 0.0 <= c_try <= grid.cmax_usd_per_mwh:
                sweep_c(c_try)
        return [c for c in results.values() if c.feasible]

    # Descend from the upper edge; the cost curve is near-unimodal in the
    # terminal cost, so stop once it has clearly turned upward.
    stride = max(1, min(6, k_hi // 10))
    best_k, best_y = k_hi, sweep_at(k_hi).y_backward_usd
    rises = 0
    k = k_hi - stride
    while k >= 0:
        if classify(k) == "feasible":
            y = sweep_at(k).y_backward_usd
            if y < best_y - 1e-9:
                best_k, best_y = k, y
                rises = 0
            else:
                rises += 1
                if rises >= 3:
                    break
        k -= stride
    refine = max(1, stride // 2)
    for k2 in range(max(0, best_k - stride), min(k_hi, best_k + refine) + 1):
        classify(k2)
    # Sub-grid pass: tighten the budget closure around the winner.
    best_c = min(
        (c for c in results.values() if c.feasible),
        key=lambda c: (c.y_backward_usd, c.c_seed),
    ).c_seed
    dc = grid.dc_usd_per_mwh / (grid.refine_splits + 1)
    for j in range(-grid.refine_splits, grid.refine_splits + 1):
        c_try = best_c + j * dc
        if 0.0 <= c_try <= grid.cmax_usd_per_mwh:
            sweep_c(c_try)
    return [c for c in results.values() if c.feasible]


def evaluate_schedule(
    plan: Plan,
    policy: Policy,
    n_periods: Optional[int] = None,
    settings: Optional[SolverSettings] = None,
) -> HorizonResult:
    """Simulate a policy forward from full health.

    Periods beyond the policy length run with the storage idle.  When the
    remaining budget cannot cover a period's calendar usage or SOH reaches
    end of life, the unit retires and stays idle; a period whose usage would
    overrun the budget is re-solved with the cap truncated to what is left.
    """
    n = n_periods if n_periods is not None else len(policy.values)
    if not (1 <= n <= plan.n_periods):
        raise ValueError(f"evaluation length {n} outside 1..{plan.n_periods}")
    sto = plan.storage
    idle = _IdleCosts(plan, settings)
    costs = np.zeros(n)
    usage = np.zeros(n)
    soh = np.zeros(n + 1)
    duals = np.full(n, np.nan)
    soh[0] = sto.soh_initial
    state = SohState(soh=sto.soh_initial)
    retired_at = None
    y = 0.0
    for t in range(1, n + 1):
        q_t = plan.q_period(t)
        remaining = sto.usage_budget_mwh - state.cumulative_usage_mwh
        alive = (
            retired_at is None
            and t <= len(policy.values)
            and remaining >= q_t - 1e-9
            and state.soh > sto.soh_end_of_life + 1e-12
        )
        if retired_at is None and not alive:
            retired_at = t
        if not alive:
            cost_t = idle.period_cost(t)
            u_real = 0.0
        else:
            if isinstance(policy, CostPolicy):
                sol, u_real, cost_t = _solve_period_priced(
                    plan, t, state.soh, float(policy.values[t - 1]), settings
                )
                if u_real > remaining + 1e-9:
                    sol, u_real, cost_t = _solve_period_capped(
                        plan, t, state.soh, remaining, settings, warm_from=sol
                    )
            else:
                cap = min(float(policy.values[t - 1]), remaining)
                if cap < q_t - 1e-9:
                    cost_t = idle.period_cost(t)
                    u_real = 0.0
                    retired_at = t
                else:
                    sol, u_real, cost_t = _solve_period_capped(plan, t, state.soh, cap, settings)
            if u_real > 0.0:
                duals[t - 1] = (
                    sol.cap_dual_usd_per_mwh if sol.cap_dual_usd_per_mwh is not None else np.nan
                )
                u_real = min(u_real, remaining)
                state = SohState(
                    soh=max(state.soh - u_real * sto.soh_per_mwh, sto.soh_end_of_life),
                    cumulative_usage_mwh=state.cumulative_usage_mwh + u_real,
                    period=state.period + 1,
                )
        costs[t - 1] = cost_t
        usage[t - 1] = u_real
        soh[t] = state.soh
        y += plan.discount.delta(t) * cost_t
    return HorizonResult(
        y_usd=y,
        period_costs_usd=costs,
        usage_mwh=usage,
        soh=soh,
        cap_duals=duals,
        retired_at=retired_at,
        label=policy.label,
    )


def no_storage_baseline(plan: Plan, settings: Optional[SolverSettings] = None) -> HorizonResult:
    """Horizon cost with the storage idle throughout."""
    idle = _IdleCosts(plan, settings)
    n = plan.n_periods
    costs = np.array([idle.period_cost(t) for t in range(1, n + 1)])
    deltas = np.array([plan.discount.delta(t) for t in range(1, n + 1)])
    soh = np.full(n + 1, plan.storage.soh_initial)
    return HorizonResult(
        y_usd=float(deltas @ costs),
        period_costs_usd=costs,
        usage_mwh=np.zeros(n),
        soh=soh,
        cap_duals=np.full(n, np.nan),
        retired_at=1,
        label="no-storage",
    )


def optimize_mcd(
    plan: Plan,
    grid: Optional[McdGrid] = None,
    include_soh_term: bool = True,
    fd_step: float = 1e-4,
    settings: Optional[SolverSettings] = None,
    jobs: int = 1,
) -> McdSchedule:
    """Grid search over (end period, terminal cost); returns the best schedule.

    Candidates are ranked by their discounted life cost plus the no-storage
    cost of the remaining horizon, so short and long lifetimes compare on the
    same footing.  Ties break toward the earlier end period, then the lower
    terminal cost.  The winning schedule is replayed forward from full health
    so the reported trajectories and duals are self-consistent.
    """
    grid = grid or McdGrid()
    idle = _IdleCosts(plan, settings)
    tail = _idle_tail_costs(plan, idle)
    tprimes = grid.tprime_values(plan)

    if jobs > 1 and len(tprimes) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tprimes))) as pool:
            futures = [
                pool.submit(_scan_tprime, plan, grid, tp, include_soh_term, fd_step, settings)
                for tp in tprimes
            ]
            per_tprime = [f.result() for f in futures]
    else:
        per_tprime = [
            _scan_tprime(plan, grid, tp, include_soh_term, fd_step, settings) for tp in tprimes
        ]

    candidates: list[SweepCandidate] = [c for group in per_tprime for c in group]
    diag = [
        (c.t_prime, c.c_seed, c.feasible, c.reason, c.y_backward_usd + tail[c.t_prime + 1])
        for c in candidates
    ]
    if not candidates:
        raise NoFeasibleCandidateError(
            "no sweep closed the budget at period 1; widen the price grid or end-period range"
        )
    best = min(candidates, key=lambda c: (c.y_backward_usd + tail[c.t_prime + 1], c.t_prime, c.c_seed))

    forward = evaluate_schedule(
        plan,
        UsagePolicy(best.usage_schedule, label="optimal-mcd"),
        n_periods=best.t_prime,
        settings=settings,
    )
    y_life = forward.y_usd
    y_total = y_life + tail[best.t_prime + 1]
    return McdSchedule(
        c_usd_per_mwh=best.cost_schedule,
        c_terminal=best.c_seed * plan.discount.delta(best.t_prime),
        c_seed=best.c_seed,
        t_star=best.t_prime,
        soh=forward.soh,
        usage_mwh=forward.usage_mwh,
        period_costs_usd=forward.period_costs_usd,
        cap_duals=forward.cap_duals,
        y_life_usd=y_life,
        y_total_usd=y_total,
        candidates=diag,
        include_soh_term=include_soh_term,
    )


@dataclasses.dataclass
class BruteForceResult:
    usage_caps_mwh: np.ndarray
    y_usd: float
    realized_usage_mwh: np.ndarray
    soh: np.ndarray
    evaluations: int


def brute_force_long_term(
    plan: Plan,
    grid_points: int = 25,
    settings: Optional[SolverSettings] = None,
) -> BruteForceResult:
    """Exhaustive search over per-period usage caps on a shared grid.

    Verification oracle for tiny horizons: every allocation on the budget
    simplex (caps at least the calendar usage, total at most the budget) is
    evaluated by solving the capped dispatch per period with SOH propagated
    by the caps.  Memoization keys each period cost by (period, cap index,
    cumulative prior cap index), which the shared grid makes exact.
    """
    n = plan.n_periods
    if n > 4:
        raise TooLargeError(f"{n} periods exceeds the brute-force cap of 4")
    if not (2 <= grid_points <= 50):
        raise TooLargeError("grid resolution must lie in 2..50")
    sto = plan.storage
    u0 = sto.usage_budget_mwh

    # Shared cap grid: the zero-price usage at full health bounds what any
    # period can usefully take; unreachable caps just leave the row slack.
    u_max = 0.0
    for t in range(1, n + 1):
        _, u_free, _ = _solve_period_priced(plan, t, sto.soh_initial, 0.0, settings)
        u_max = max(u_max, u_free)
    q_max = max(plan.q_period(t) for t in range(1, n + 1))
    u_max = min(max(u_max, q_max), u0)
    if u_max <= q_max:
        raise TooLargeError("degenerate cap grid: budget leaves no room above calendar usage")
    # Choose the step so allocations can exhaust the budget exactly: the
    # usable residual above the calendar floor must be a whole number of
    # steps, otherwise the oracle is forced to strand budget worth real cost.
    residual = u0 - n * q_max
    step = (u_max - q_max) / (grid_points - 1)
    if 0 < residual <= n * (u_max - q_max):
        m = max(1, round(residual / step))
        step = residual / m
    caps = q_max + step * np.arange(grid_points)
    caps = caps[caps <= u_max + 1e-9]
    grid_points = caps.size
    if grid_points < 2:
        raise TooLargeError("cap grid collapsed; loosen the budget or resolution")

    memo: dict[tuple, tuple] = {}
    evals = 0

    def period_cost(t: int, i: int, s: int):
        nonlocal evals
        key = (t, i, s)
        if key not in memo:
            soh_val = sto.soh_initial - (s * step + (t - 1) * q_max) * sto.soh_per_mwh
            warm = memo.get((t, i - 1, s))
            evals += 1
            sol, u_real, cost = _solve_period_capped(
                plan, t, soh_val, float(caps[i]), settings,
                warm_from=warm[2] if warm else None,
            )
            memo[key] = (cost, u_real, sol)
        return memo[key]

    best_y = math.inf
    best_idx = None

    def search(t: int, s: int, y_acc: float, idx: list):
        nonlocal best_y, best_idx
        if t > n:
            if y_acc < best_y - 1e-12:
                best_y = y_acc
                best_idx = tuple(idx)
            return
        for i in range(grid_points):
            total_next = (s + i) * step + t * q_max
            if total_next > u0 + 1e-9:
                break
            cost, _, _ = period_cost(t, i, s)
            idx.append(i)
            search(t + 1, s + i, y_acc + plan.discount.delta(t) * cost, idx)
            idx.pop()

    search(1, 0, 0.0, [])
    if best_idx is None:
        raise HorizonError("no feasible allocation on the cap grid")
    u_alloc = np.array([caps[i] for i in best_idx])
    realized = np.zeros(n)
    soh = np.zeros(n + 1)
    soh[0] = sto.soh_initial
    s = 0
    for t in range(1, n + 1):
        cost, u_real, _ = period_cost(t, best_idx[t - 1], s)
        realized[t - 1] = u_real
        s += best_idx[t - 1]
        soh[t] = sto.soh_initial - (s * step + t * q_max) * sto.soh_per_mwh
    return BruteForceResult(
        usage_caps_mwh=u_alloc,
        y_usd=best_y,
        realized_usage_mwh=realized,
        soh=soh,
        evaluations=evals,
    )
