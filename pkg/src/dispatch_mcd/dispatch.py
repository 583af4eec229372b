"""Daily economic dispatch as a convex QP, in two flavours.

Mode A caps the storage throughput for the day (hard usage limit, with the
cap row's dual exposed as the marginal value of usage).  Mode C prices the
throughput in the objective instead.  Either way the model is one day of 24
hourly steps: a thermal generator and a controllable load with quadratic
costs, one wind feed-in (surplus spilled free), and one storage unit whose
ratings are derated by its state of health.

Variable layout of the QP (n = 121):

    [0:24)    generation (MW)
    [24:48)   load reduction (MW)
    [48:72)   discharge (MW)
    [72:96)   charge (MW)
    [96:121)  stored energy at hour boundaries (MWh), 25 knots

The hourly energy recursion applies efficiency as discharge/eta and
charge*eta; note some texts use the opposite placement, this one is kept
as modelled throughout the package.
"""

from __future__ import annotations

import dataclasses
from typing import Optional, Union

import numpy as np

from .degradation import SohState, StorageParams, derate, usage_of
from .qp import QpProblem, QpSolution, SolverSettings, solve_qp

HOURS = 24
N_VARS = HOURS * 4 + (HOURS + 1)
_G = slice(0, 24)
_L = slice(24, 48)
_SP = slice(48, 72)
_SM = slice(72, 96)
_E = slice(96, 121)

CAP_LABEL = "degradation_cap"


class DispatchError(Exception):
    pass


class CapInactiveError(DispatchError):
    """The usage cap is slack: its dual is zero and carries no information."""


@dataclasses.dataclass(frozen=True)
class GenParams:
    capacity_mw: float = 100.0
    a_usd_per_mw2h: float = 0.1
    b_usd_per_mwh: float = 30.0

    def __post_init__(self):
        if self.capacity_mw <= 0 or self.a_usd_per_mw2h < 0:
            raise ValueError("generator capacity must be positive, quadratic cost nonnegative")


@dataclasses.dataclass(frozen=True)
class LoadParams:
    capacity_mw: float = 10.0
    a_usd_per_mw2h: float = 0.1
    b_usd_per_mwh: float = 70.0

    def __post_init__(self):
        if self.capacity_mw < 0 or self.a_usd_per_mw2h < 0:
            raise ValueError("load-reduction capacity and quadratic cost must be nonnegative")


@dataclasses.dataclass(frozen=True)
class DayProfile:
    """One dispatch day: hourly available wind energy (MWh) and load (MW)."""

    wind_mwh: np.ndarray
    load_mw: np.ndarray
    dt_h: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "wind_mwh", np.asarray(self.wind_mwh, dtype=float))
        object.__setattr__(self, "load_mw", np.asarray(self.load_mw, dtype=float))
        if self.wind_mwh.shape != (HOURS,) or self.load_mw.shape != (HOURS,):
            raise ValueError(f"profiles must have exactly {HOURS} hourly entries")
        if np.any(self.wind_mwh < 0) or np.any(self.load_mw < 0):
            raise ValueError("profiles must be nonnegative")


@dataclasses.dataclass(frozen=True)
class ConstrainedUsage:
    """Mode A: throughput for the day capped at ``u_mwh`` (incl. calendar)."""

    u_mwh: float

    def __post_init__(self):
        if self.u_mwh < 0:
            raise ValueError("usage cap must be nonnegative")


@dataclasses.dataclass(frozen=True)
class DegradationCost:
    """Mode C: throughput priced at ``c_usd_per_mwh`` in the objective."""

    c_usd_per_mwh: float

    def __post_init__(self):
        if self.c_usd_per_mwh < 0:
            raise ValueError("degradation cost must be nonnegative")


Mode = Union[ConstrainedUsage, DegradationCost]


@dataclasses.dataclass(frozen=True)
class DispatchInstance:
    gen: GenParams
    load: LoadParams
    storage: StorageParams
    day: DayProfile
    soh: SohState
    mode: Mode

    def derated(self):
        return derate(self.soh.soh, self.storage)


@dataclasses.dataclass
class DispatchSolution:
    """Optimal day schedule with costs, realized usage and cap dual."""

    gen_mw: np.ndarray
    load_reduction_mw: np.ndarray
    discharge_mw: np.ndarray
    charge_mw: np.ndarray
    energy_mwh: np.ndarray  # 25 knots
    system_cost_usd: float  # generation + load-reduction cost only
    objective_usd: float  # mode A: == system cost; mode C: + c * usage
    degradation_term_usd: float
    usage_mwh: float
    cap_dual_usd_per_mwh: Optional[float]
    status: str
    iterations: int
    qp: QpSolution


def _base_problem(instance: DispatchInstance, extra_rows: int):
    """Shared constraint structure; the caller appends mode-specific rows."""
    gen, load, sto, day = instance.gen, instance.load, instance.storage, instance.day
    r = instance.derated()
    dt = day.dt_h
    eta = r.efficiency
    keep = 1.0 - sto.self_discharge_per_hour

    Q = np.zeros((N_VARS, N_VARS))
    idx = np.arange(HOURS)
    Q[idx, idx] = 2.0 * gen.a_usd_per_mw2h
    Q[idx + 24, idx + 24] = 2.0 * load.a_usd_per_mw2h
    c = np.zeros(N_VARS)
    c[_G] = gen.b_usd_per_mwh
    c[_L] = load.b_usd_per_mwh

    m = HOURS + extra_rows
    A = np.zeros((m, N_VARS))
    b = np.zeros(m)
    labels = []
    for h in range(HOURS):
        # Power balance, spill allowed: (g + sp - sm + l) dt >= L dt - W.
        A[h, 0 + h] = -dt
        A[h, 24 + h] = -dt
        A[h, 48 + h] = -dt
        A[h, 72 + h] = +dt
        b[h] = day.wind_mwh[h] - day.load_mw[h] * dt
        labels.append(f"balance_h{h}")

    E = np.zeros((HOURS + 1, N_VARS))
    f = np.zeros(HOURS + 1)
    eq_labels = []
    for h in range(HOURS):
        E[h, 96 + h + 1] = 1.0
        E[h, 96 + h] = -keep
        E[h, 48 + h] = dt / eta
        E[h, 72 + h] = -dt * eta
        eq_labels.append(f"energy_h{h}")
    E[HOURS, 96] = 1.0
    E[HOURS, 96 + HOURS] = -1.0
    eq_labels.append("energy_periodic")

    lb = np.zeros(N_VARS)
    ub = np.concatenate(
        [
            np.full(HOURS, gen.capacity_mw),
            np.full(HOURS, load.capacity_mw),
            np.full(HOURS * 2, r.power_capacity_mw),
            np.full(HOURS + 1, r.energy_capacity_mwh),
        ]
    )
    return Q, c, A, b, labels, E, f, eq_labels, lb, ub, r


def build_problem_a(instance: DispatchInstance) -> QpProblem:
    """Degradation-constrained day QP: hard cap on storage throughput."""
    if not isinstance(instance.mode, ConstrainedUsage):
        raise ValueError("mode must be ConstrainedUsage for problem A")
    u = instance.mode.u_mwh
    q = instance.storage.calendar_usage_mwh
    if u < q - 1e-12:
        raise ValueError(f"cap {u} MWh is below the calendar floor {q} MWh")
    Q, c, A, b, labels, E, f, eq_labels, lb, ub, _ = _base_problem(instance, extra_rows=1)
    A[HOURS, _SP] = instance.day.dt_h
    A[HOURS, _SM] = instance.day.dt_h
    b[HOURS] = u - q
    labels.append(CAP_LABEL)
    return QpProblem(Q=Q, c_lin=c, A=A, b=b, E=E, f=f, lb=lb, ub=ub,
                     ineq_labels=labels, eq_labels=eq_labels)


def build_problem_c(instance: DispatchInstance) -> QpProblem:
    """Degradation-cost day QP: throughput priced, no cap row.

    The constant part of the storage cost (price times calendar usage) is not
    representable in the QP objective; ``solve_dispatch`` adds it back.
    """
    if not isinstance(instance.mode, DegradationCost):
        raise ValueError("mode must be DegradationCost for problem C")
    Q, c, A, b, labels, E, f, eq_labels, lb, ub, _ = _base_problem(instance, extra_rows=0)
    price = instance.mode.c_usd_per_mwh
    c[_SP] += price * instance.day.dt_h
    c[_SM] += price * instance.day.dt_h
    return QpProblem(Q=Q, c_lin=c, A=A, b=b, E=E, f=f, lb=lb, ub=ub,
                     ineq_labels=labels, eq_labels=eq_labels)


def build_problem(instance: DispatchInstance) -> QpProblem:
    if isinstance(instance.mode, ConstrainedUsage):
        return build_problem_a(instance)
    return build_problem_c(instance)


def _idle_start(instance: DispatchInstance) -> Optional[np.ndarray]:
    """Feasible point with the storage idle, when one exists."""
    day = instance.day
    r = instance.derated()
    need = day.load_mw - day.wind_mwh / day.dt_h
    g = np.clip(need, 0.0, instance.gen.capacity_mw)
    l = np.clip(need - g, 0.0, instance.load.capacity_mw)
    if np.any(need - g - l > 1e-9):
        return None  # load unservable without storage; let phase 1 try
    x0 = np.zeros(N_VARS)
    x0[_G] = g
    x0[_L] = l
    x0[_E] = 0.5 * r.energy_capacity_mwh
    return x0


def _assemble_feasible(
    instance: DispatchInstance,
    sp: np.ndarray,
    sm: np.ndarray,
    e0_guess: float,
) -> Optional[np.ndarray]:
    """Turn a storage schedule guess into a feasible full start, or give up.

    Repairs in order: clip to the derated power cap, shrink to any usage cap,
    rebalance charge against discharge so the day stays energy-periodic, fit
    the energy trajectory inside its window, and recompute the generation and
    load-reduction split hour by hour.
    """
    day = instance.day
    r = instance.derated()
    dt = day.dt_h
    eta = r.efficiency
    sp = np.clip(sp, 0.0, r.power_capacity_mw)
    sm = np.clip(sm, 0.0, r.power_capacity_mw)
    if isinstance(instance.mode, ConstrainedUsage):
        cap = instance.mode.u_mwh - instance.storage.calendar_usage_mwh
        total = float((sp.sum() + sm.sum()) * dt)
        if total > cap:
            shrink = 0.0 if cap <= 0 else cap / total * (1.0 - 1e-12)
            sp = sp * shrink
            sm = sm * shrink
    dis = float(np.sum(sp) * dt / eta)
    chg = float(np.sum(sm) * dt * eta)
    if chg > dis:
        sm = sm * (dis / chg if chg > 0 else 0.0)
    elif dis > chg:
        sp = sp * (chg / dis if dis > 0 else 0.0)
    cum = np.concatenate([[0.0], np.cumsum(-sp * dt / eta + sm * dt * eta)])
    span = float(cum.max() - cum.min())
    if span > r.energy_capacity_mwh:
        scale = r.energy_capacity_mwh / span * (1.0 - 1e-9)
        sp, sm = sp * scale, sm * scale
        cum = np.concatenate([[0.0], np.cumsum(-sp * dt / eta + sm * dt * eta)])
    e0 = float(np.clip(e0_guess, -cum.min(), r.energy_capacity_mwh - cum.max()))
    e = e0 + cum
    need = day.load_mw - day.wind_mwh / dt - sp + sm
    g = np.clip(need, 0.0, instance.gen.capacity_mw)
    l = np.clip(need - g, 0.0, instance.load.capacity_mw)
    if np.any(need - g - l > 1e-9):
        return None
    x0 = np.zeros(N_VARS)
    x0[_G], x0[_L], x0[_SP], x0[_SM], x0[_E] = g, l, sp, sm, e
    return x0


def _repair_start(instance: DispatchInstance, reference: "DispatchSolution") -> Optional[np.ndarray]:
    """Feasible start near a reference solution of a nearby instance (used
    for finite-difference pairs and cap re-solves within one day)."""
    return _assemble_feasible(
        instance,
        reference.discharge_mw.copy(),
        reference.charge_mw.copy(),
        float(reference.energy_mwh[0]),
    )


def _greedy_start(instance: DispatchInstance) -> Optional[np.ndarray]:
    """Storage-aware start: greedy arbitrage between cheap and dear hours.

    Hours are valued at the idle dispatch's marginal cost (zero in surplus
    hours).  Charge capacity from the cheapest hours is matched against
    discharge into the dearest hours while the round trip stays profitable
    at the instance's usage price.  The result is only a guess; the repair
    pass makes it feasible and the active set finishes the job.
    """
    day = instance.day
    gen, lod = instance.gen, instance.load
    r = instance.derated()
    dt = day.dt_h
    eta = r.efficiency
    need = day.load_mw - day.wind_mwh / dt
    g = np.clip(need, 0.0, gen.capacity_mw)
    l = np.clip(need - g, 0.0, lod.capacity_mw)
    if np.any(need - g - l > 1e-9):
        return None
    price = instance.mode.c_usd_per_mwh if isinstance(instance.mode, DegradationCost) else 0.0
    # Per MWh charged: deliver eta^2 at the discharge hour, pay the charge
    # energy and the throughput price on both legs.  The running budget is
    # total charge energy, limited by the storable window and any usage cap.
    eta2 = eta * eta
    budget = r.energy_capacity_mwh / eta
    if isinstance(instance.mode, ConstrainedUsage):
        budget = min(budget, (instance.mode.u_mwh - instance.storage.calendar_usage_mwh) / (1.0 + eta2))
    budget = max(budget, 0.0)
    # Marginal cost of serving (or absorbing) one more MWh per hour; moved
    # energy walks these marginals along the quadratic costs block by block,
    # so the guess rations itself instead of overshooting.
    surplus = np.maximum(-need, 0.0)
    g_virt = g.copy()
    marg_dis = np.where(need <= 0.0, 0.0,
                        np.where(g >= gen.capacity_mw - 1e-9,
                                 lod.b_usd_per_mwh + 2.0 * lod.a_usd_per_mw2h * l,
                                 gen.b_usd_per_mwh + 2.0 * gen.a_usd_per_mw2h * g))
    marg_chg = np.where(surplus > 0.0, 0.0, gen.b_usd_per_mwh + 2.0 * gen.a_usd_per_mw2h * g_virt)
    slope = 2.0 * gen.a_usd_per_mw2h
    sp = np.zeros(HOURS)
    sm = np.zeros(HOURS)
    charge_left = np.full(HOURS, r.power_capacity_mw)
    discharge_left = np.full(HOURS, r.power_capacity_mw)
    block = max(r.power_capacity_mw / 12.0, 1e-6)
    for _ in range(HOURS * 16):
        if budget <= 1e-9:
            break
        cand_c = np.where(charge_left > 1e-9, marg_chg, np.inf)
        cand_d = np.where(discharge_left > 1e-9, marg_dis, -np.inf)
        i = int(np.argmin(cand_c))
        j = int(np.argmax(cand_d))
        if i == j or not np.isfinite(cand_c[i]):
            break
        gain = eta2 * cand_d[j] - cand_c[i] - price * (1.0 + eta2)
        if gain <= 1e-9 or cand_d[j] <= 0.0:
            break
        amount = min(block, charge_left[i], discharge_left[j] / eta2, budget / dt)
        if amount <= 1e-9:
            break
        sm[i] += amount
        sp[j] += amount * eta2
        charge_left[i] -= amount
        discharge_left[j] -= amount * eta2
        budget -= amount * dt
        # Discharge displaces generation; charging eats surplus, then thermal.
        marg_dis[j] = max(marg_dis[j] - slope * amount * eta2, 0.0)
        if surplus[i] >= amount:
            surplus[i] -= amount
        else:
            g_virt[i] += amount - surplus[i]
            surplus[i] = 0.0
            marg_chg[i] = gen.b_usd_per_mwh + 2.0 * gen.a_usd_per_mw2h * g_virt[i]
    if sp.max() <= 0.0:
        return _idle_start(instance)
    return _assemble_feasible(instance, sp, sm, 0.5 * r.energy_capacity_mwh)


def solve_dispatch(
    instance: DispatchInstance,
    settings: Optional[SolverSettings] = None,
    warm_from: Optional["DispatchSolution"] = None,
) -> DispatchSolution:
    """Solve the day and assemble schedules, costs and the realized usage."""
    problem = build_problem(instance)
    x0 = None
    if warm_from is not None:
        x0 = _repair_start(instance, warm_from)
    if x0 is None:
        x0 = _greedy_start(instance)
    if x0 is None:
        x0 = _idle_start(instance)
    qp_sol = solve_qp(problem, settings=settings, x0=x0)

    x = qp_sol.x
    tiny = -1e-7
    sched = np.where((x > tiny) & (x < 0.0), 0.0, x)
    gen = sched[_G].copy()
    red = sched[_L].copy()
    sp = sched[_SP].copy()
    sm = sched[_SM].copy()
    energy = np.clip(sched[_E].copy(), 0.0, None)

    day, sto = instance.day, instance.storage
    system_cost = float(
        np.sum(instance.gen.a_usd_per_mw2h * gen**2 + instance.gen.b_usd_per_mwh * gen)
        + np.sum(instance.load.a_usd_per_mw2h * red**2 + instance.load.b_usd_per_mwh * red)
    )
    usage = usage_of(sm, sp, day.dt_h, sto.calendar_usage_mwh)
    if isinstance(instance.mode, DegradationCost):
        deg_term = instance.mode.c_usd_per_mwh * usage
        cap_dual = None
    else:
        deg_term = 0.0
        cap_dual = max(0.0, qp_sol.dual(CAP_LABEL))
    return DispatchSolution(
        gen_mw=gen,
        load_reduction_mw=red,
        discharge_mw=sp,
        charge_mw=sm,
        energy_mwh=energy,
        system_cost_usd=system_cost,
        objective_usd=system_cost + deg_term,
        degradation_term_usd=deg_term,
        usage_mwh=usage,
        cap_dual_usd_per_mwh=cap_dual,
        status=qp_sol.status,
        iterations=qp_sol.iterations,
        qp=qp_sol,
    )


def marginal_usage_value(
    instance: DispatchInstance,
    settings: Optional[SolverSettings] = None,
    strict: bool = False,
    solution: Optional[DispatchSolution] = None,
) -> float:
    """Dual of the day's usage cap: the marginal system value of one MWh.

    Equals -dF/du at the cap.  A slack cap has zero marginal value; with
    ``strict=True`` that case raises ``CapInactiveError`` instead (the cap
    exceeds the unconstrained optimum's usage).
    """
    if not isinstance(instance.mode, ConstrainedUsage):
        raise ValueError("marginal usage value requires ConstrainedUsage mode")
    sol = solution if solution is not None else solve_dispatch(instance, settings=settings)
    slack = instance.mode.u_mwh - sol.usage_mwh
    if slack > 1e-6 and strict:
        raise CapInactiveError(
            f"cap {instance.mode.u_mwh} MWh is slack by {slack:.3e}; dual carries no signal"
        )
    return float(sol.cap_dual_usd_per_mwh)


@dataclasses.dataclass(frozen=True)
class SohSensitivity:
    value_usd_per_soh: float
    method: str  # "central" | "forward" | "backward"
    step: float


def soh_sensitivity(
    instance: DispatchInstance,
    step: float = 1e-4,
    settings: Optional[SolverSettings] = None,
    warm_from: Optional[DispatchSolution] = None,
) -> SohSensitivity:
    """Finite-difference dF/dH of the day's optimal objective.

    Central difference by default; one-sided (and flagged) when the SOH sits
    within one step of its admissible range.  More health never hurts, so the
    value is nonpositive up to solver noise.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    sto = instance.storage
    h = instance.soh.soh
    hi = min(h + step, sto.soh_initial)
    lo = max(h - step, sto.soh_end_of_life)
    if hi <= lo:
        raise ValueError("SOH range too narrow for the requested step")
    method = "central"
    if hi < h + step * (1 - 1e-9):
        method = "backward"
        hi = h
    elif lo > h - step * (1 - 1e-9):
        method = "forward"
        lo = h

    def objective_at(soh_value: float) -> float:
        inst = dataclasses.replace(instance, soh=dataclasses.replace(instance.soh, soh=soh_value))
        sol = solve_dispatch(inst, settings=settings, warm_from=warm_from)
        return sol.objective_usd

    f_hi = objective_at(hi)
    f_lo = objective_at(lo)
    return SohSensitivity(
        value_usd_per_soh=(f_hi - f_lo) / (hi - lo),
        method=method,
        step=step,
    )
