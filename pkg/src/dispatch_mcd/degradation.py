"""State-of-health bookkeeping for battery storage.

Usage accounting, SOH evolution, and SOH-dependent derating of ratings.
SOH falls linearly with throughput: spending the whole usage budget takes the
unit from its initial SOH to end of life.  Derating works through internal
impedance: energy capacity scales with SOH directly, impedance ramps linearly
to its end-of-life multiple, and power capacity and one-way efficiency follow
from the impedance.

All functions are pure; states are immutable value objects.
"""

from __future__ import annotations

import dataclasses

import numpy as np


class DegradationError(Exception):
    pass


class SohOutOfRangeError(DegradationError):
    pass


class BudgetExceededError(DegradationError):
    pass


class NegativeScheduleError(DegradationError):
    pass


@dataclasses.dataclass(frozen=True)
class StorageParams:
    """Static ratings and degradation budget of one storage unit.

    ``usage_budget_mwh`` is the lifetime throughput (charge plus discharge,
    plus calendar equivalents) that takes SOH from ``soh_initial`` down to
    ``soh_end_of_life``.  ``calendar_usage_mwh`` is the throughput-equivalent
    calendar degradation per dispatch day, incurred even when idle.
    """

    power_capacity_mw: float = 50.0
    energy_capacity_mwh: float = 200.0
    efficiency: float = 0.95
    self_discharge_per_hour: float = 0.0
    usage_budget_mwh: float = 1.2e6
    calendar_usage_mwh: float = 50.0
    soh_initial: float = 1.0
    soh_end_of_life: float = 0.7
    impedance_eol_ratio: float = 2.0
    impedance_initial: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.soh_end_of_life < self.soh_initial <= 1.0):
            raise ValueError("need 0 < soh_end_of_life < soh_initial <= 1")
        if not (self.usage_budget_mwh >= self.calendar_usage_mwh > 0.0):
            raise ValueError("need usage_budget >= calendar_usage > 0")
        if not (0.0 < self.efficiency <= 1.0):
            raise ValueError("efficiency must be in (0, 1]")
        if self.impedance_eol_ratio < 1.0:
            raise ValueError("impedance at end of life cannot shrink")
        if self.power_capacity_mw <= 0 or self.energy_capacity_mwh <= 0:
            raise ValueError("ratings must be positive")
        if not (0.0 <= self.self_discharge_per_hour < 1.0):
            raise ValueError("self-discharge rate must be in [0, 1)")

    @property
    def soh_per_mwh(self) -> float:
        """SOH lost per MWh of usage: (H0 - H_eol) / budget."""
        return (self.soh_initial - self.soh_end_of_life) / self.usage_budget_mwh


@dataclasses.dataclass(frozen=True)
class SohState:
    """SOH, cumulative usage and period counter for one unit."""

    soh: float
    cumulative_usage_mwh: float = 0.0
    period: int = 0

    def consistent_with(self, params: StorageParams, tol: float = 1e-9) -> bool:
        """Check the two equivalent forms of the SOH evolution agree."""
        implied = (params.soh_initial - self.soh) / params.soh_per_mwh
        return abs(implied - self.cumulative_usage_mwh) <= tol * max(1.0, abs(self.cumulative_usage_mwh))


@dataclasses.dataclass(frozen=True)
class DeratedRatings:
    """SOH-dependent effective ratings used by the dispatch model."""

    energy_capacity_mwh: float
    impedance: float
    power_capacity_mw: float
    efficiency: float


def derate(soh: float, params: StorageParams) -> DeratedRatings:
    """Effective ratings at the given SOH.

    Energy capacity scales with SOH; impedance ramps linearly from its initial
    value to the end-of-life multiple as SOH moves from initial to end of
    life; power capacity is inversely proportional to impedance; one-way
    efficiency degrades with the impedance ratio.
    """
    lo, hi = params.soh_end_of_life, params.soh_initial
    if not (lo - 1e-12 <= soh <= hi + 1e-12):
        raise SohOutOfRangeError(f"SOH {soh} outside [{lo}, {hi}]")
    soh = min(max(soh, lo), hi)
    z0 = params.impedance_initial
    z_eol = params.impedance_eol_ratio * z0
    z = z0 + (z_eol - z0) * (hi - soh) / (hi - lo)
    eta0 = params.efficiency
    return DeratedRatings(
        energy_capacity_mwh=soh * params.energy_capacity_mwh,
        impedance=z,
        power_capacity_mw=(z0 / z) * params.power_capacity_mw,
        efficiency=1.0 / (1.0 + (z / z0) * (1.0 - eta0) / eta0),
    )


def soh_step(state: SohState, usage_mwh: float, params: StorageParams) -> SohState:
    """Advance one period, spending ``usage_mwh`` of the budget.

    Zero usage is allowed for consistency checks; operationally every live
    period costs at least the calendar usage.
    """
    if usage_mwh < 0:
        raise NegativeScheduleError(f"usage {usage_mwh} is negative")
    new_soh = state.soh - usage_mwh * params.soh_per_mwh
    if new_soh < params.soh_end_of_life - 1e-12:
        raise BudgetExceededError(
            f"usage {usage_mwh} MWh would push SOH to {new_soh:.9f}, below "
            f"end of life {params.soh_end_of_life}; truncate the period or retire"
        )
    return SohState(
        soh=new_soh,
        cumulative_usage_mwh=state.cumulative_usage_mwh + usage_mwh,
        period=state.period + 1,
    )


def usage_of(charge_mw, discharge_mw, dt_h: float, calendar_mwh: float) -> float:
    """Throughput of a schedule: (charge + discharge) energy plus calendar.

    Schedules are the nonnegative charge/discharge power series in MW.
    """
    charge = np.asarray(charge_mw, dtype=float)
    discharge = np.asarray(discharge_mw, dtype=float)
    if np.any(charge < 0) or np.any(discharge < 0):
        bad = min(float(np.min(charge)), float(np.min(discharge)))
        raise NegativeScheduleError(f"schedule has negative entry {bad}")
    return float((charge.sum() + discharge.sum()) * dt_h + calendar_mwh)
