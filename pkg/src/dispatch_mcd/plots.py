"""Report figures rendered alongside the CSV outputs.

Each function takes already-computed results and writes one PNG; nothing here
recomputes or solves.  Figures mirror the delimited tables the CLI emits:
the degradation-cost schedule over the storage life, policy savings, the
SOH trajectories, a dispatch day, and the first-year cost versus the
generator's marginal cost.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .baselines import PolicyComparison
from .dispatch import DayProfile, DispatchSolution
from .horizon import DiscountModel, HorizonResult, McdSchedule


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _year_axis(n_periods: int, discount: DiscountModel) -> np.ndarray:
    t = np.arange(1, n_periods + 1)
    return (t - 1) / discount.periods_per_year + 1.0


def mcd_schedule_figure(
    schedule: McdSchedule,
    discount: DiscountModel,
    path,
    lcod_value: Optional[float] = None,
    no_soh_schedule: Optional[McdSchedule] = None,
) -> Path:
    """Degradation cost over the unit's life, with optional comparators."""
    fig, ax = plt.subplots(figsize=(7, 4))
    x = _year_axis(schedule.t_star, discount)
    ax.plot(x, schedule.c_usd_per_mwh, lw=1.8, label="optimal MCD")
    if no_soh_schedule is not None:
        x2 = _year_axis(no_soh_schedule.t_star, discount)
        ax.plot(x2, no_soh_schedule.c_usd_per_mwh, lw=1.4, ls="--", label="MCD without SOH term")
    if lcod_value is not None:
        ax.axhline(lcod_value, color="tab:orange", ls=":", lw=1.6, label=f"LCOD = {lcod_value:.2f}")
    ax.set_xlabel("year of storage life")
    ax.set_ylabel("degradation cost ($/MWh-throughput)")
    ax.legend()
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def soh_trajectory_figure(
    results: Sequence[tuple[str, HorizonResult]],
    discount: DiscountModel,
    path,
) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, res in results:
        n = res.soh.size - 1
        x = np.concatenate([[1.0], _year_axis(n, discount) + 1.0 / discount.periods_per_year])
        ax.plot(x, res.soh, lw=1.5, label=label)
    ax.set_xlabel("year")
    ax.set_ylabel("state of health")
    ax.legend()
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def savings_figure(comparison: PolicyComparison, path) -> Path:
    table = comparison.savings_table()
    names = ["optimal_mcd", "no_soh_term", "lcod", "zero_cost"]
    values = [table[n]["savings_usd"] / 1e6 for n in names]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    bars = ax.bar(names, values, color=["tab:blue", "tab:cyan", "tab:orange", "tab:gray"])
    for b, v in zip(bars, values):
        ax.annotate(f"{v:.2f}", (b.get_x() + b.get_width() / 2, v), ha="center", va="bottom")
    ax.set_ylabel("life-cycle savings (M$)")
    ax.set_title("system cost saved vs no-storage baseline")
    ax.grid(alpha=0.3, axis="y")
    return _finish(fig, path)


def dispatch_day_figure(solution: DispatchSolution, day: DayProfile, path) -> Path:
    hours = np.arange(day.load_mw.size)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.5, 6), sharex=True)
    ax1.plot(hours, day.load_mw, lw=1.6, color="black", label="load")
    ax1.plot(hours, day.wind_mwh / day.dt_h, lw=1.4, color="tab:green", label="wind")
    ax1.plot(hours, solution.gen_mw, lw=1.4, color="tab:red", label="generation")
    ax1.plot(hours, solution.load_reduction_mw, lw=1.2, color="tab:purple", label="load reduction")
    ax1.set_ylabel("MW")
    ax1.legend(ncol=2, fontsize=8)
    ax1.grid(alpha=0.3)
    net = solution.discharge_mw - solution.charge_mw
    ax2.bar(hours, net, color=np.where(net >= 0, "tab:blue", "tab:orange"))
    ax2t = ax2.twinx()
    ax2t.plot(hours, solution.energy_mwh[:-1], color="tab:gray", lw=1.2)
    ax2t.set_ylabel("stored energy (MWh)", color="tab:gray")
    ax2.set_ylabel("discharge − charge (MW)")
    ax2.set_xlabel("hour")
    ax2.grid(alpha=0.3)
    return _finish(fig, path)


def sweep_bg_figure(b_values: Sequence[float], c_first_year: Sequence[float], fit: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.scatter(b_values, c_first_year, zorder=3, label="first-year MCD")
    xs = np.linspace(min(b_values), max(b_values), 50)
    ax.plot(xs, fit["slope"] * xs + fit["intercept"], ls="--", color="tab:red",
            label=f"fit: {fit['slope']:.3f} b {fit['intercept']:+.2f} (R²={fit['r_squared']:.3f})")
    ax.set_xlabel("generator marginal cost b ($/MWh)")
    ax.set_ylabel("first-year MCD ($/MWh-throughput)")
    ax.legend()
    ax.grid(alpha=0.3)
    return _finish(fig, path)
