"""Profiles, configuration, and results on disk.

Profiles are plain CSV (one header row, columns ``wind_mwh,load_mw``, one row
per hour of the year).  Configuration is a single YAML file with units spelled
out in the key names so the parameter tables map one to one.  Results are CSV
tables plus YAML summaries; floats are written at full precision so written
artifacts re-load bit-exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .baselines import CapitalParams, PolicyComparison
from .degradation import StorageParams
from .dispatch import DayProfile, DispatchSolution, GenParams, LoadParams
from .horizon import DiscountModel, HorizonResult, McdGrid, McdSchedule, PeriodSpec, Plan

HOURS_PER_YEAR = 8760
HOURS_LEAP_YEAR = 8784


class IoError(Exception):
    pass


class ParseError(IoError):
    def __init__(self, path, row: int, column: str, detail: str):
        super().__init__(f"{path}:{row}: bad {column}: {detail}")
        self.row = row
        self.column = column


class LengthMismatchError(IoError):
    pass


class NegativeValueError(IoError):
    def __init__(self, path, row: int, column: str, value: float):
        super().__init__(f"{path}:{row}: negative {column}: {value}")
        self.row = row
        self.column = column


@dataclasses.dataclass
class AnnualProfiles:
    """One year of hourly wind energy (MWh) and load (MW)."""

    wind_mwh: np.ndarray
    load_mw: np.ndarray
    source: str = "unspecified"
    leap: bool = False

    def __post_init__(self):
        self.wind_mwh = np.asarray(self.wind_mwh, dtype=float)
        self.load_mw = np.asarray(self.load_mw, dtype=float)

    @property
    def hours(self) -> int:
        return self.wind_mwh.size

    def day(self, index: int, dt_h: float = 1.0) -> DayProfile:
        sl = slice(index * 24, (index + 1) * 24)
        return DayProfile(wind_mwh=self.wind_mwh[sl], load_mw=self.load_mw[sl], dt_h=dt_h)


def load_profiles(path) -> AnnualProfiles:
    """Read and validate an annual profile CSV."""
    path = Path(path)
    wind = []
    load = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LengthMismatchError(f"{path}: empty file") from None
        cols = [c.strip().lower() for c in header]
        if cols[:2] != ["wind_mwh", "load_mw"]:
            raise ParseError(path, 1, "header", f"expected wind_mwh,load_mw, got {header!r}")
        for row_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ParseError(path, row_no, "row", f"expected 2 columns, got {len(row)}")
            values = []
            for col_name, cell in zip(("wind_mwh", "load_mw"), row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(path, row_no, col_name, f"not a number: {cell!r}") from None
            for col_name, v in zip(("wind_mwh", "load_mw"), values):
                if math.isnan(v) or v < 0:
                    raise NegativeValueError(path, row_no, col_name, v)
            wind.append(values[0])
            load.append(values[1])
    n = len(wind)
    if n not in (HOURS_PER_YEAR, HOURS_LEAP_YEAR):
        raise LengthMismatchError(
            f"{path}: {n} data rows; expected {HOURS_PER_YEAR} (or {HOURS_LEAP_YEAR} for leap years)"
        )
    return AnnualProfiles(
        wind_mwh=np.array(wind),
        load_mw=np.array(load),
        source=str(path),
        leap=(n == HOURS_LEAP_YEAR),
    )


def save_profiles(profiles: AnnualProfiles, path) -> None:
    """Write profiles at full float precision (lossless round trip)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["wind_mwh", "load_mw"])
        for w, l in zip(profiles.wind_mwh, profiles.load_mw):
            writer.writerow([repr(float(w)), repr(float(l))])


@dataclasses.dataclass(frozen=True)
class SynthParams:
    """Shape parameters of the synthetic wind/load year."""

    wind_capacity_mw: float = 90.0
    wind_capacity_factor: float = 0.63
    mean_load_mw: float = 57.0
    wind_seasonal_amplitude: float = 0.22
    wind_diurnal_amplitude: float = 0.35
    wind_noise_sd: float = 0.14
    wind_peak_day: float = 15.0
    wind_peak_hour: float = 2.0
    load_seasonal_amplitude: float = 0.24
    load_diurnal_amplitude: float = 0.42
    load_noise_sd: float = 0.03
    load_peak_day: float = 205.0
    load_peak_hour: float = 17.0

    def __post_init__(self):
        if not (0.0 < self.wind_capacity_factor <= 1.0):
            raise ValueError("wind capacity factor must lie in (0, 1]")
        if self.mean_load_mw <= 0 or self.wind_capacity_mw <= 0:
            raise ValueError("capacities must be positive")


def synth_profiles(seed: int, params: Optional[SynthParams] = None) -> AnnualProfiles:
    """Deterministic synthetic year: seasonal + diurnal structure + AR noise.

    Wind peaks on winter nights, load on summer evenings, so net load swings
    through the day and the year.  Realized wind capacity factor and mean
    load land within a fraction of a percent of their targets (iterative
    rescale after clipping).
    """
    p = params or SynthParams()
    rng = np.random.default_rng(seed)
    hours = np.arange(HOURS_PER_YEAR)
    day = hours / 24.0
    hod = hours % 24

    def ar1(sd: float, rho: float = 0.92) -> np.ndarray:
        eps = rng.normal(0.0, 1.0, HOURS_PER_YEAR)
        out = np.empty(HOURS_PER_YEAR)
        out[0] = eps[0]
        for t in range(1, HOURS_PER_YEAR):
            out[t] = rho * out[t - 1] + math.sqrt(1.0 - rho * rho) * eps[t]
        return sd * out

    if p.wind_capacity_factor >= 1.0:
        wind = np.full(HOURS_PER_YEAR, p.wind_capacity_mw)
    else:
        cf = p.wind_capacity_factor * (
            1.0
            + p.wind_seasonal_amplitude * np.cos(2 * np.pi * (day - p.wind_peak_day) / 365.0)
            + p.wind_diurnal_amplitude * np.cos(2 * np.pi * (hod - p.wind_peak_hour) / 24.0)
        ) + ar1(p.wind_noise_sd)
        for _ in range(8):
            cf = np.clip(cf, 0.0, 1.0)
            mean = cf.mean()
            if abs(mean - p.wind_capacity_factor) <= 1e-4 * p.wind_capacity_factor:
                break
            cf = cf * (p.wind_capacity_factor / mean)
        wind = p.wind_capacity_mw * np.clip(cf, 0.0, 1.0)

    diurnal = p.load_diurnal_amplitude * (
        0.75 * np.cos(2 * np.pi * (hod - p.load_peak_hour) / 24.0)
        + 0.25 * np.cos(4 * np.pi * (hod - p.load_peak_hour + 3.0) / 24.0)
    )
    shape = (
        1.0
        + p.load_seasonal_amplitude * np.cos(2 * np.pi * (day - p.load_peak_day) / 365.0)
        + diurnal
        + ar1(p.load_noise_sd)
    )
    for _ in range(8):
        shape = np.clip(shape, 0.0, None)
        mean = shape.mean()
        if abs(mean - 1.0) <= 1e-6:
            break
        shape = shape / mean
    load = p.mean_load_mw * shape
    return AnnualProfiles(wind_mwh=wind, load_mw=load, source=f"synthetic(seed={seed})")


@dataclasses.dataclass
class RunConfig:
    """Everything a run needs: system, storage, money, horizon, grid, synth."""

    gen: GenParams = dataclasses.field(default_factory=GenParams)
    load: LoadParams = dataclasses.field(default_factory=LoadParams)
    storage: StorageParams = dataclasses.field(default_factory=StorageParams)
    capital: CapitalParams = dataclasses.field(default_factory=CapitalParams)
    annual_rate: float = 0.07
    years: int = 15
    compress_days_per_period: int = 1
    grid: McdGrid = dataclasses.field(default_factory=McdGrid)
    synth: SynthParams = dataclasses.field(default_factory=SynthParams)
    seed: int = 42

    def __post_init__(self):
        if self.years < 1:
            raise ValueError("horizon must cover at least one year")
        if self.compress_days_per_period < 1:
            raise ValueError("compression factor must be at least 1")
        if self.annual_rate < 0:
            raise ValueError("discount rate must be nonnegative")
        n = self.n_periods
        if self.grid.tprimes is not None:
            for t in self.grid.tprimes:
                if not (1 <= int(t) <= n):
                    raise ValueError(f"end-period candidate {t} outside horizon 1..{n}")

    @property
    def periods_per_year(self) -> int:
        return max(1, round(365 / self.compress_days_per_period))

    @property
    def n_periods(self) -> int:
        return self.years * self.periods_per_year

    @property
    def discount(self) -> DiscountModel:
        return DiscountModel(annual_rate=self.annual_rate, periods_per_year=self.periods_per_year)


def _section(data: dict, name: str) -> dict:
    value = data.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise IoError(f"config section {name!r} must be a mapping")
    return value


def config_from_dict(data: dict) -> RunConfig:
    system = _section(data, "system")
    gen_d = _section(system, "generator")
    load_d = _section(system, "load_reduction")
    sto_d = _section(data, "storage")
    cap_d = _section(data, "capital")
    disc_d = _section(data, "discount")
    hor_d = _section(data, "horizon")
    grid_d = _section(data, "mcd_grid")
    synth_d = _section(data, "synth")

    tprimes = grid_d.get("tprime_periods")
    if isinstance(tprimes, str):
        if tprimes != "year_ends":
            raise IoError(f"unknown tprime_periods keyword {tprimes!r}")
        tprimes = None
    return RunConfig(
        gen=GenParams(
            capacity_mw=float(gen_d.get("capacity_mw", 100.0)),
            a_usd_per_mw2h=float(gen_d.get("a_usd_per_mw2h", 0.1)),
            b_usd_per_mwh=float(gen_d.get("b_usd_per_mwh", 30.0)),
        ),
        load=LoadParams(
            capacity_mw=float(load_d.get("capacity_mw", 10.0)),
            a_usd_per_mw2h=float(load_d.get("a_usd_per_mw2h", 0.1)),
            b_usd_per_mwh=float(load_d.get("b_usd_per_mwh", 70.0)),
        ),
        storage=StorageParams(
            power_capacity_mw=float(sto_d.get("power_capacity_mw", 50.0)),
            energy_capacity_mwh=float(sto_d.get("energy_capacity_mwh", 200.0)),
            efficiency=float(sto_d.get("one_way_efficiency", 0.95)),
            self_discharge_per_hour=float(sto_d.get("self_discharge_per_hour", 0.0)),
            usage_budget_mwh=float(sto_d.get("usage_budget_mwh", 1.2e6)),
            calendar_usage_mwh=float(sto_d.get("calendar_usage_mwh_per_day", 50.0)),
            soh_initial=float(sto_d.get("soh_initial", 1.0)),
            soh_end_of_life=float(sto_d.get("soh_end_of_life", 0.7)),
            impedance_eol_ratio=float(sto_d.get("impedance_eol_ratio", 2.0)),
        ),
        capital=CapitalParams(
            cost_usd_per_kwh=float(cap_d.get("cost_usd_per_kwh", 200.0)),
            depreciation_ratio=float(cap_d.get("depreciation_ratio", 0.3)),
            amortization_years=int(cap_d.get("amortization_years", 15)),
            design_throughput_mwh=(
                float(cap_d["design_throughput_mwh"])
                if cap_d.get("design_throughput_mwh") is not None
                else None
            ),
        ),
        annual_rate=float(disc_d.get("annual_rate", 0.07)),
        years=int(hor_d.get("years", 15)),
        compress_days_per_period=int(hor_d.get("compress_days_per_period", 1)),
        grid=McdGrid(
            dc_usd_per_mwh=float(grid_d.get("dc_usd_per_mwh", 0.25)),
            cmax_usd_per_mwh=float(grid_d.get("cmax_usd_per_mwh", 30.0)),
            tprimes=tuple(int(t) for t in tprimes) if tprimes is not None else None,
            refine_splits=int(grid_d.get("refine_splits", 5)),
        ),
        synth=SynthParams(
            wind_capacity_mw=float(synth_d.get("wind_capacity_mw", 90.0)),
            wind_capacity_factor=float(synth_d.get("wind_capacity_factor", 0.63)),
            mean_load_mw=float(synth_d.get("mean_load_mw", 57.0)),
            wind_seasonal_amplitude=float(synth_d.get("wind_seasonal_amplitude", 0.22)),
            wind_diurnal_amplitude=float(synth_d.get("wind_diurnal_amplitude", 0.35)),
            wind_noise_sd=float(synth_d.get("wind_noise_sd", 0.14)),
            wind_peak_day=float(synth_d.get("wind_peak_day", 15.0)),
            wind_peak_hour=float(synth_d.get("wind_peak_hour", 2.0)),
            load_seasonal_amplitude=float(synth_d.get("load_seasonal_amplitude", 0.24)),
            load_diurnal_amplitude=float(synth_d.get("load_diurnal_amplitude", 0.42)),
            load_noise_sd=float(synth_d.get("load_noise_sd", 0.03)),
            load_peak_day=float(synth_d.get("load_peak_day", 205.0)),
            load_peak_hour=float(synth_d.get("load_peak_hour", 17.0)),
        ),
        seed=int(data.get("seed", 42)),
    )


def load_config(path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise IoError(f"{path}: config must be a YAML mapping")
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "seed": cfg.seed,
        "system": {
            "generator": {
                "capacity_mw": cfg.gen.capacity_mw,
                "a_usd_per_mw2h": cfg.gen.a_usd_per_mw2h,
                "b_usd_per_mwh": cfg.gen.b_usd_per_mwh,
            },
            "load_reduction": {
                "capacity_mw": cfg.load.capacity_mw,
                "a_usd_per_mw2h": cfg.load.a_usd_per_mw2h,
                "b_usd_per_mwh": cfg.load.b_usd_per_mwh,
            },
        },
        "storage": {
            "power_capacity_mw": cfg.storage.power_capacity_mw,
            "energy_capacity_mwh": cfg.storage.energy_capacity_mwh,
            "one_way_efficiency": cfg.storage.efficiency,
            "self_discharge_per_hour": cfg.storage.self_discharge_per_hour,
            "usage_budget_mwh": cfg.storage.usage_budget_mwh,
            "calendar_usage_mwh_per_day": cfg.storage.calendar_usage_mwh,
            "soh_initial": cfg.storage.soh_initial,
            "soh_end_of_life": cfg.storage.soh_end_of_life,
            "impedance_eol_ratio": cfg.storage.impedance_eol_ratio,
        },
        "capital": {
            "cost_usd_per_kwh": cfg.capital.cost_usd_per_kwh,
            "depreciation_ratio": cfg.capital.depreciation_ratio,
            "amortization_years": cfg.capital.amortization_years,
            "design_throughput_mwh": cfg.capital.design_throughput_mwh,
        },
        "discount": {"annual_rate": cfg.annual_rate},
        "horizon": {
            "years": cfg.years,
            "compress_days_per_period": cfg.compress_days_per_period,
        },
        "mcd_grid": {
            "dc_usd_per_mwh": cfg.grid.dc_usd_per_mwh,
            "cmax_usd_per_mwh": cfg.grid.cmax_usd_per_mwh,
            "tprime_periods": list(cfg.grid.tprimes) if cfg.grid.tprimes is not None else "year_ends",
            "refine_splits": cfg.grid.refine_splits,
        },
        "synth": {
            "wind_capacity_mw": cfg.synth.wind_capacity_mw,
            "wind_capacity_factor": cfg.synth.wind_capacity_factor,
            "mean_load_mw": cfg.synth.mean_load_mw,
            "wind_seasonal_amplitude": cfg.synth.wind_seasonal_amplitude,
            "wind_diurnal_amplitude": cfg.synth.wind_diurnal_amplitude,
            "wind_noise_sd": cfg.synth.wind_noise_sd,
            "wind_peak_day": cfg.synth.wind_peak_day,
            "wind_peak_hour": cfg.synth.wind_peak_hour,
            "load_seasonal_amplitude": cfg.synth.load_seasonal_amplitude,
            "load_diurnal_amplitude": cfg.synth.load_diurnal_amplitude,
            "load_noise_sd": cfg.synth.load_noise_sd,
            "load_peak_day": cfg.synth.load_peak_day,
            "load_peak_hour": cfg.synth.load_peak_hour,
        },
    }


def save_config(cfg: RunConfig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def plan_from_profiles(cfg: RunConfig, profiles: AnnualProfiles) -> Plan:
    """Representative-period plan: one mid-block day stands for each block.

    With compression w, the year is cut into round(365/w) blocks of w days;
    the block's middle day is dispatched once and weighted by w.  The same
    representative year repeats for every horizon year.
    """
    w = cfg.compress_days_per_period
    p = cfg.periods_per_year
    days_available = profiles.hours // 24
    specs = []
    for j in range(p):
        day_index = min(j * w + w // 2, days_available - 1)
        specs.append(
            PeriodSpec(
                day=profiles.day(day_index),
                gen=cfg.gen,
                load=cfg.load,
                weight_days=float(w),
                profile_key=j,
            )
        )
    periods = tuple(specs[t % p] for t in range(cfg.n_periods))
    return Plan(periods=periods, storage=cfg.storage, discount=cfg.discount)


# ---------------------------------------------------------------------------
# Results


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def write_schedule_csv(schedule: McdSchedule, discount: DiscountModel, path) -> None:
    """Per-period series of the optimal schedule."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "year", "c_usd_per_mwh", "soh_start", "usage_mwh", "period_cost_usd", "cap_dual_usd_per_mwh"]
        )
        for i in range(schedule.t_star):
            t = i + 1
            writer.writerow(
                [
                    t,
                    discount.year_index(t) + 1,
                    _fmt(schedule.c_usd_per_mwh[i]),
                    _fmt(schedule.soh[i]),
                    _fmt(schedule.usage_mwh[i]),
                    _fmt(schedule.period_costs_usd[i]),
                    _fmt(schedule.cap_duals[i]),
                ]
            )


def read_schedule_csv(path) -> dict:
    """Re-load a schedule table into arrays keyed by column name."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise LengthMismatchError(f"{path}: no schedule rows")
    out: dict = {}
    for key in rows[0]:
        vals = []
        for r in rows:
            cell = r[key]
            vals.append(float(cell) if cell not in ("", None) else math.nan)
        out[key] = np.array(vals)
    return out


def write_horizon_csv(result: HorizonResult, discount: DiscountModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "year", "period_cost_usd", "usage_mwh", "soh_start", "cap_dual_usd_per_mwh"])
        n = result.period_costs_usd.size
        for i in range(n):
            t = i + 1
            writer.writerow(
                [
                    t,
                    discount.year_index(t) + 1,
                    _fmt(result.period_costs_usd[i]),
                    _fmt(result.usage_mwh[i]),
                    _fmt(result.soh[i]),
                    _fmt(result.cap_duals[i]),
                ]
            )


def write_candidates_csv(schedule: McdSchedule, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_prime", "c_seed_usd_per_mwh", "feasible", "reason", "y_total_usd"])
        for t_prime, c_seed, feasible, reason, y in sorted(schedule.candidates):
            writer.writerow([t_prime, _fmt(c_seed), int(feasible), reason or "", _fmt(y)])


def write_dispatch_csv(solution: DispatchSolution, day: DayProfile, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["hour", "wind_mwh", "load_mw", "gen_mw", "load_reduction_mw",
             "discharge_mw", "charge_mw", "energy_mwh"]
        )
        for h in range(day.wind_mwh.size):
            writer.writerow(
                [
                    h,
                    _fmt(day.wind_mwh[h]),
                    _fmt(day.load_mw[h]),
                    _fmt(solution.gen_mw[h]),
                    _fmt(solution.load_reduction_mw[h]),
                    _fmt(solution.discharge_mw[h]),
                    _fmt(solution.charge_mw[h]),
                    _fmt(solution.energy_mwh[h]),
                ]
            )


def write_comparison_csv(comparison: PolicyComparison, discount: DiscountModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    results = {
        "no_storage": comparison.baseline,
        "optimal_mcd": comparison.optimal,
        "no_soh_term": comparison.no_soh,
        "lcod": comparison.lcod,
        "zero_cost": comparison.zero_cost,
    }
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "t", "year", "period_cost_usd", "usage_mwh", "soh_start"])
        for name, res in results.items():
            for i in range(res.period_costs_usd.size):
                t = i + 1
                writer.writerow(
                    [
                        name,
                        t,
                        discount.year_index(t) + 1,
                        _fmt(res.period_costs_usd[i]),
                        _fmt(res.usage_mwh[i]),
                        _fmt(res.soh[i]),
                    ]
                )


def write_summary_yaml(payload: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        yaml.safe_dump(_plain(payload), fh, sort_keys=False)


def write_manifest(cfg: RunConfig, path, extra: Optional[dict] = None) -> None:
    """Run provenance: config echo, package/library versions, seed."""
    payload = {
        "tool": {"name": "dispatch-mcd", "version": __version__},
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
        "config": config_to_dict(cfg),
    }
    if extra:
        payload.update(_plain(extra))
    write_summary_yaml(payload, path)


def _plain(obj):
    """Recursively convert numpy scalars/arrays for YAML emission."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj
