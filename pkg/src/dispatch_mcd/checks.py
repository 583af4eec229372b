"""Self-contained invariant suite behind the ``validate`` command.

Every check returns a CheckResult; the suite passes only if all do.  The
checks restate the package's contracts end to end: KKT quality of the QP
solver, the closed-form derating values, the analytic dispatch cases, the
duality and equivalence identities, recursion arithmetic, levelized-cost
arithmetic, numerical stability of the health sensitivity, and bit-level
determinism of a small seeded run.
"""

from __future__ import annotations

import dataclasses
import time
from typing import Callable, Optional

import numpy as np

from . import baselines, degradation, dispatch, horizon, qp
from .io import SynthParams, synth_profiles


@dataclasses.dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _toy_day(seed: int, spread: float) -> dispatch.DayProfile:
    rng = np.random.default_rng(seed)
    h = np.arange(24)
    load = 57 * (1 + 0.35 * spread * np.sin(2 * np.pi * (h - 17) / 24)) + rng.normal(0, 1.5, 24)
    wind = 60 * (1 + 0.6 * np.sin(2 * np.pi * (h - 2) / 24)) + rng.normal(0, 5, 24)
    return dispatch.DayProfile(wind_mwh=np.clip(wind, 0, 95), load_mw=np.clip(load, 0, None))


def _toy_storage() -> degradation.StorageParams:
    return degradation.StorageParams(
        usage_budget_mwh=950.0,
        calendar_usage_mwh=50.0,
        soh_end_of_life=0.97,
        impedance_eol_ratio=1.15,
    )


def toy_plan() -> horizon.Plan:
    """Three-period oracle configuration used across the test surface."""
    gen = dispatch.GenParams()
    load = dispatch.LoadParams()
    periods = [
        horizon.PeriodSpec(day=_toy_day(s, sp), gen=gen, load=load, weight_days=1.0, profile_key=i)
        for i, (s, sp) in enumerate(zip((2, 7, 11), (1.0, 1.2, 1.4)))
    ]
    return horizon.Plan(
        periods=tuple(periods),
        storage=_toy_storage(),
        discount=horizon.DiscountModel(annual_rate=0.07, periods_per_year=1),
    )


def _sample_instance(seed: int, mode, soh: float = 1.0) -> dispatch.DispatchInstance:
    return dispatch.DispatchInstance(
        gen=dispatch.GenParams(),
        load=dispatch.LoadParams(),
        storage=degradation.StorageParams(),
        day=_toy_day(seed, 1.0 + 0.1 * (seed % 4)),
        soh=degradation.SohState(soh=soh),
        mode=mode,
    )


# -- individual checks -------------------------------------------------------


def check_qp_analytic() -> tuple[bool, str]:
    s1 = qp.solve_qp(qp.QpProblem(Q=[[2.0]], c_lin=[-2.0]))
    ok1 = abs(s1.x[0] - 1.0) < 1e-9 and abs(s1.objective + 1.0) < 1e-9
    p2 = qp.QpProblem(Q=[[2.0]], c_lin=[0.0], A=[[-1.0]], b=[-3.0], ineq_labels=["m"])
    s2 = qp.solve_qp(p2)
    ok2 = abs(s2.x[0] - 3.0) < 1e-9 and abs(s2.dual("m") - 6.0) < 1e-8
    return ok1 and ok2, f"x1={s1.x[0]:.12f}, dual={s2.dual('m'):.12f}"


def check_qp_random_kkt(samples: int = 40) -> tuple[bool, str]:
    rng = np.random.default_rng(123)
    worst = 0.0
    for k in range(samples):
        n = int(rng.integers(6, 16))
        M = rng.normal(size=(n, n))
        Q = M.T @ M + (0.2 if k % 2 else 0.0) * np.eye(n)
        xf = rng.normal(size=n)
        A = rng.normal(size=(n // 2, n))
        b = A @ xf + np.abs(rng.normal(size=n // 2)) + 0.05
        E = rng.normal(size=(max(1, n // 5), n))
        prob = qp.QpProblem(
            Q=Q, c_lin=rng.normal(size=n), A=A, b=b, E=E, f=E @ xf,
            lb=xf - np.abs(rng.normal(size=n)) - 0.2,
            ub=xf + np.abs(rng.normal(size=n)) + 0.2,
        )
        rep = qp.check_kkt(prob, qp.solve_qp(prob), tol=1e-7)
        worst = max(worst, rep.stationarity, rep.feasibility, rep.complementarity)
        if not rep.passed:
            return False, f"instance {k} failed: {rep}"
    return True, f"{samples} instances, worst residual {worst:.2e}"


def check_derating_formulas() -> tuple[bool, str]:
    params = degradation.StorageParams()
    expect = {
        1.0: (200.0, 1.0, 50.0, 0.95),
        0.85: (170.0, 1.5, 50.0 / 1.5, 1.0 / (1.0 + 1.5 * 0.05 / 0.95)),
        0.7: (140.0, 2.0, 25.0, 1.0 / (1.0 + 2.0 * 0.05 / 0.95)),
    }
    for soh, (e, z, pcap, eta) in expect.items():
        r = degradation.derate(soh, params)
        if not (
            abs(r.energy_capacity_mwh - e) <= 1e-12
            and abs(r.impedance - z) <= 1e-12
            and abs(r.power_capacity_mw - pcap) <= 1e-12
            and abs(r.efficiency - eta) <= 1e-12
        ):
            return False, f"derate({soh}) = {r}"
    step = degradation.soh_step(degradation.SohState(soh=1.0), 50.0, params)
    if abs(step.soh - 0.9999875) > 1e-10:
        return False, f"calendar step gave {step.soh}"
    return True, "closed-form points exact"


def check_dispatch_analytic() -> tuple[bool, str]:
    sto = degradation.StorageParams()
    day = dispatch.DayProfile(
        wind_mwh=np.zeros(24),
        load_mw=np.concatenate([[60.0], np.zeros(23)]),
    )
    inst = dispatch.DispatchInstance(
        gen=dispatch.GenParams(), load=dispatch.LoadParams(), storage=sto, day=day,
        soh=degradation.SohState(soh=1.0),
        mode=dispatch.ConstrainedUsage(u_mwh=sto.calendar_usage_mwh),
    )
    c1 = dispatch.solve_dispatch(inst).system_cost_usd
    day2 = dispatch.DayProfile(
        wind_mwh=np.zeros(24),
        load_mw=np.concatenate([[120.0], np.zeros(23)]),
    )
    inst2 = dataclass_replace(inst, day=day2, load=dispatch.LoadParams(capacity_mw=30.0))
    c2 = dispatch.solve_dispatch(inst2).system_cost_usd
    ok = abs(c1 - 2160.0) <= 1e-6 * 2160.0 and abs(c2 - 5440.0) <= 1e-6 * 5440.0
    return ok, f"costs {c1:.6f}, {c2:.6f}"


def dataclass_replace(obj, **kw):
    return dataclasses.replace(obj, **kw)


def check_dispatch_invariants(samples: int = 4) -> tuple[bool, str]:
    worst = 0.0
    for seed in range(samples):
        inst = _sample_instance(seed, dispatch.DegradationCost(4.0), soh=0.9)
        sol = dispatch.solve_dispatch(inst)
        r = inst.derated()
        recon = (
            sol.energy_mwh[1:]
            - (1 - inst.storage.self_discharge_per_hour) * sol.energy_mwh[:-1]
            + sol.discharge_mw / r.efficiency
            - sol.charge_mw * r.efficiency
        )
        resid = float(np.max(np.abs(recon)))
        periodic = abs(sol.energy_mwh[0] - sol.energy_mwh[-1])
        simult = float(np.max(np.minimum(sol.discharge_mw, sol.charge_mw)))
        worst = max(worst, resid, periodic)
        if resid > 1e-6 or periodic > 1e-6 or simult > 1e-4:
            return False, f"seed {seed}: recursion {resid:.2e}, periodic {periodic:.2e}, simult {simult:.2e}"
    return True, f"{samples} days, worst residual {worst:.2e}"


def check_duality_fd(samples: int = 3) -> tuple[bool, str]:
    worst = 0.0
    for seed in range(samples):
        day = _toy_day(seed + 20, 1.1)
        mk = lambda u: dispatch.DispatchInstance(
            gen=dispatch.GenParams(), load=dispatch.LoadParams(),
            storage=degradation.StorageParams(), day=day,
            soh=degradation.SohState(soh=1.0), mode=dispatch.ConstrainedUsage(u_mwh=u),
        )
        u = 300.0
        lam = dispatch.marginal_usage_value(mk(u))
        hi = dispatch.solve_dispatch(mk(u + 1.0)).system_cost_usd
        lo = dispatch.solve_dispatch(mk(u - 1.0)).system_cost_usd
        fd = (hi - lo) / 2.0
        rel = abs(-fd - lam) / max(abs(lam), 1e-12)
        worst = max(worst, rel)
        if rel > 1e-3:
            return False, f"seed {seed}: dual {lam:.6f} vs -fd {-fd:.6f} (rel {rel:.2e})"
    return True, f"worst relative error {worst:.2e}"


def check_lemma2(samples: int = 4) -> tuple[bool, str]:
    worst = 0.0
    for seed in range(samples):
        price = 15.5 + 0.5 * seed
        inst_c = _sample_instance(seed + 3, dispatch.DegradationCost(price))
        sol_c = dispatch.solve_dispatch(inst_c)
        inst_a = dataclass_replace(inst_c, mode=dispatch.ConstrainedUsage(u_mwh=sol_c.usage_mwh))
        sol_a = dispatch.solve_dispatch(inst_a)
        rel = abs(sol_a.system_cost_usd - sol_c.system_cost_usd) / max(sol_c.system_cost_usd, 1e-9)
        worst = max(worst, rel)
        if rel > 1e-5:
            return False, f"seed {seed}: {rel:.2e}"
    return True, f"worst relative gap {worst:.2e}"


def check_recursion_step() -> tuple[bool, str]:
    params = degradation.StorageParams()
    v1 = horizon.mcd_recursion_step(10.0, 0.0, 1.0, params)
    v2 = horizon.mcd_recursion_step(10.0, 0.0, 1.0 / 1.07, params)
    v3 = horizon.mcd_recursion_step(10.0, -1000.0, 1.0, params)
    ok = (
        abs(v1 - 10.0) < 1e-12
        and abs(v2 - 9.345794392523363) < 1e-9
        and abs(v3 - 10.00025) < 1e-12
    )
    return ok, f"{v1:.6f}, {v2:.6f}, {v3:.6f}"


def check_lcod_value() -> tuple[bool, str]:
    value = baselines.lcod_cost(
        baselines.CapitalParams(),
        degradation.StorageParams(),
        horizon.DiscountModel(annual_rate=0.07, periods_per_year=365),
    )
    ok = abs(value - 16.47) <= 0.01
    zero_rate = baselines.lcod_cost(
        baselines.CapitalParams(),
        degradation.StorageParams(),
        horizon.DiscountModel(annual_rate=0.0, periods_per_year=365),
    )
    ok = ok and abs(zero_rate - 10.0) < 1e-9
    return ok, f"lcod={value:.4f}, undiscounted={zero_rate:.4f}"


def check_soh_sensitivity_stability() -> tuple[bool, str]:
    inst = _sample_instance(1, dispatch.DegradationCost(1.0), soh=0.8)
    a = dispatch.soh_sensitivity(inst, step=1e-4).value_usd_per_soh
    b = dispatch.soh_sensitivity(inst, step=5e-5).value_usd_per_soh
    rel = abs(a - b) / max(abs(a), 1e-9)
    return rel <= 0.01 and a <= 1e-6, f"step 1e-4: {a:.4f}, 5e-5: {b:.4f} (rel {rel:.2e})"


def check_monotonicity() -> tuple[bool, str]:
    day = _toy_day(5, 1.3)
    sto = degradation.StorageParams()
    costs_u = []
    for u in (100.0, 250.0, 400.0, 700.0, 1100.0):
        inst = dispatch.DispatchInstance(
            gen=dispatch.GenParams(), load=dispatch.LoadParams(), storage=sto, day=day,
            soh=degradation.SohState(soh=1.0), mode=dispatch.ConstrainedUsage(u_mwh=u),
        )
        costs_u.append(dispatch.solve_dispatch(inst).system_cost_usd)
    ok_u = all(a >= b - 1e-7 for a, b in zip(costs_u, costs_u[1:]))
    costs_h = []
    for soh in (0.72, 0.79, 0.86, 0.93, 1.0):
        inst = dispatch.DispatchInstance(
            gen=dispatch.GenParams(), load=dispatch.LoadParams(), storage=sto, day=day,
            soh=degradation.SohState(soh=soh), mode=dispatch.ConstrainedUsage(u_mwh=600.0),
        )
        costs_h.append(dispatch.solve_dispatch(inst).system_cost_usd)
    ok_h = all(a >= b - 1e-6 for a, b in zip(costs_h, costs_h[1:]))
    return ok_u and ok_h, f"F(u) ladder {np.round(costs_u,2)}, F(H) ladder {np.round(costs_h,2)}"


def check_toy_oracle() -> tuple[bool, str]:
    plan = toy_plan()
    grid = horizon.McdGrid(dc_usd_per_mwh=0.05, cmax_usd_per_mwh=25.0)
    opt = horizon.optimize_mcd(plan, grid)
    bf = horizon.brute_force_long_term(plan, grid_points=26)
    rel = abs(opt.y_total_usd - bf.y_usd) / bf.y_usd
    active = opt.usage_mwh > plan.q_period(1) + 1.0
    dual_rel = float(
        np.max(
            np.abs(opt.cap_duals[active] - opt.c_usd_per_mwh[active])
            / np.maximum(opt.c_usd_per_mwh[active], 1e-9)
        )
    )
    ok = rel <= 1e-3 and dual_rel <= 0.02
    return ok, f"y gap {rel:.2e}, worst dual gap {dual_rel:.2%}"


def check_forward_backward_consistency() -> tuple[bool, str]:
    plan = toy_plan()
    grid = horizon.McdGrid(dc_usd_per_mwh=0.1, cmax_usd_per_mwh=25.0)
    opt = horizon.optimize_mcd(plan, grid)
    replay = horizon.evaluate_schedule(
        plan, horizon.UsagePolicy(opt.usage_mwh, label="replay"), n_periods=opt.t_star
    )
    rel = abs(replay.y_usd - opt.y_life_usd) / max(opt.y_life_usd, 1e-9)
    total = float(opt.usage_mwh.sum())
    closure_ok = total <= plan.storage.usage_budget_mwh + plan.q_period(1)
    return rel <= 1e-6 and closure_ok, f"replay rel {rel:.2e}, usage {total:.1f}"


def check_profile_roundtrip(tmpdir) -> tuple[bool, str]:
    from . import io as dio

    prof = synth_profiles(7, SynthParams())
    path = tmpdir / "profiles.csv"
    dio.save_profiles(prof, path)
    back = dio.load_profiles(path)
    ok = np.array_equal(back.wind_mwh, prof.wind_mwh) and np.array_equal(back.load_mw, prof.load_mw)
    cf = prof.wind_mwh.mean() / SynthParams().wind_capacity_mw
    ok = ok and abs(cf - 0.63) <= 0.0063 and abs(prof.load_mw.mean() - 57.0) <= 0.57
    return ok, f"cf={cf:.4f}, mean load={prof.load_mw.mean():.3f}, lossless={ok}"


def check_determinism() -> tuple[bool, str]:
    def run_once():
        plan = toy_plan()
        opt = horizon.optimize_mcd(plan, horizon.McdGrid(dc_usd_per_mwh=0.5, cmax_usd_per_mwh=25.0))
        return opt.c_usd_per_mwh.tobytes() + opt.usage_mwh.tobytes() + opt.soh.tobytes()

    a = run_once()
    b = run_once()
    return a == b, "two seeded runs bit-identical" if a == b else "runs diverged"


def run_all(quick: bool = False, tmpdir=None) -> list[CheckResult]:
    """Run the invariant suite; ``quick`` trims the heavy oracle checks."""
    import tempfile
    from pathlib import Path

    owned = None
    if tmpdir is None:
        owned = tempfile.TemporaryDirectory()
        tmpdir = Path(owned.name)
    checks: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
        ("qp_analytic_examples", check_qp_analytic),
        ("qp_random_kkt", lambda: check_qp_random_kkt(12 if quick else 40)),
        ("derating_formulas", check_derating_formulas),
        ("dispatch_analytic_cases", check_dispatch_analytic),
        ("dispatch_energy_invariants", lambda: check_dispatch_invariants(2 if quick else 4)),
        ("cap_dual_finite_difference", lambda: check_duality_fd(2 if quick else 3)),
        ("priced_capped_equivalence", lambda: check_lemma2(2 if quick else 4)),
        ("mcd_recursion_values", check_recursion_step),
        ("lcod_arithmetic", check_lcod_value),
        ("soh_sensitivity_stability", check_soh_sensitivity_stability),
        ("cost_monotonicity", check_monotonicity),
        ("profiles_roundtrip", lambda: check_profile_roundtrip(tmpdir)),
        ("forward_backward_consistency", check_forward_backward_consistency),
        ("run_determinism", check_determinism),
    ]
    if not quick:
        checks.append(("toy_long_term_oracle", check_toy_oracle))
    results = []
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append(CheckResult(name, passed, detail, time.perf_counter() - t0))
    if owned is not None:
        owned.cleanup()
    return results
