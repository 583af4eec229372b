"""Command-line front end.

Subcommands map to the package's experiments: ``dispatch`` solves one period,
``optimize`` runs the backward grid search for the optimal degradation cost
schedule, ``compare`` evaluates the policy lineup, ``sweep-bg`` traces the
first-year cost against the generator's marginal cost, and ``validate`` runs
the invariant suite.  Progress goes to stderr; results land in files under
--out (tables as CSV, summaries as YAML, figures as PNG unless --no-plots).

Exit codes: 0 success, 1 domain failure (infeasible instance, empty candidate
grid), 2 usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, baselines, checks, dispatch, horizon
from . import io as dio
from . import plots
from .degradation import DegradationError, SohState
from .qp import QpError

logger = logging.getLogger("dispatch_mcd")

WORKDIR_ENV = "DISPATCH_MCD_WORKDIR"


class CliError(Exception):
    """Usage-level problem detected after argument parsing."""


def _add_common(parser: argparse.ArgumentParser, profiles: bool = True) -> None:
    parser.add_argument("--config", required=True, help="run configuration YAML")
    parser.add_argument("--out", required=True, help="output directory (created if missing)")
    parser.add_argument("--workdir", default=None,
                        help=f"base for relative paths (default ${WORKDIR_ENV} or cwd)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    if profiles:
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument("--profiles", help="annual profile CSV (wind_mwh,load_mw)")
        group.add_argument("--synth", action="store_true",
                           help="generate synthetic profiles from the config")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dispatch-mcd",
        description="Degradation-aware dispatch with optimal marginal degradation costs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_dispatch = sub.add_parser("dispatch", help="solve a single dispatch period")
    _add_common(p_dispatch)
    p_dispatch.add_argument("--day", type=int, default=0, help="day-of-year index (default 0)")
    p_dispatch.add_argument("--soh", type=float, default=None, help="state of health (default initial)")
    mode = p_dispatch.add_mutually_exclusive_group(required=True)
    mode.add_argument("--u-mwh", type=float, help="usage cap for the day (mode A)")
    mode.add_argument("--c-usd-per-mwh", type=float, help="degradation price (mode C)")

    p_opt = sub.add_parser("optimize", help="backward search for the optimal MCD schedule")
    _add_common(p_opt)
    p_opt.add_argument("--dc", type=float, default=None, help="price grid step, $/MWh")
    p_opt.add_argument("--cmax", type=float, default=None, help="price grid ceiling, $/MWh")
    p_opt.add_argument("--compress", type=int, default=None, help="days per representative period")
    p_opt.add_argument("--jobs", type=int, default=1, help="parallel workers over end periods")
    p_opt.add_argument("--no-soh-term", action="store_true",
                       help="drop the health-sensitivity term from the recursion")

    p_cmp = sub.add_parser("compare", help="optimal vs LCOD vs no-SOH vs zero-cost policies")
    _add_common(p_cmp)
    p_cmp.add_argument("--dc", type=float, default=None)
    p_cmp.add_argument("--cmax", type=float, default=None)
    p_cmp.add_argument("--compress", type=int, default=None)
    p_cmp.add_argument("--jobs", type=int, default=1)

    p_bg = sub.add_parser("sweep-bg", help="first-year MCD versus generator marginal cost")
    _add_common(p_bg)
    p_bg.add_argument("--values", default="20,30,40,50",
                      help="comma-separated b values in $/MWh (default 20,30,40,50)")
    p_bg.add_argument("--jobs", type=int, default=1)
    p_bg.add_argument("--compress", type=int, default=None)

    p_val = sub.add_parser("validate", help="run the module invariant suite")
    p_val.add_argument("--out", required=True, help="directory for the validation report")
    p_val.add_argument("--workdir", default=None)
    p_val.add_argument("--quick", action="store_true", help="smaller sample sizes")
    p_val.add_argument("-v", "--verbose", action="store_true")
    return parser


def _resolve(base: Path, value) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def _setup(args) -> Path:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    workdir = Path(args.workdir or os.environ.get(WORKDIR_ENV, "."))
    return workdir


def _load_inputs(args, workdir: Path):
    cfg = dio.load_config(_resolve(workdir, args.config))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    for name in ("dc", "cmax", "compress"):
        value = getattr(args, name, None)
        if value is not None:
            if name == "compress":
                cfg = dataclasses.replace(cfg, compress_days_per_period=value)
            else:
                field = "dc_usd_per_mwh" if name == "dc" else "cmax_usd_per_mwh"
                cfg = dataclasses.replace(cfg, grid=dataclasses.replace(cfg.grid, **{field: value}))
    if getattr(args, "profiles", None):
        profiles = dio.load_profiles(_resolve(workdir, args.profiles))
        logger.info("loaded profiles from %s (%d hours)", args.profiles, profiles.hours)
    else:
        profiles = dio.synth_profiles(cfg.seed, cfg.synth)
        logger.info("synthesised profiles (seed %d, cf %.3f, mean load %.1f MW)",
                    cfg.seed, profiles.wind_mwh.mean() / cfg.synth.wind_capacity_mw,
                    profiles.load_mw.mean())
    return cfg, profiles


def _cmd_dispatch(args) -> int:
    workdir = _setup(args)
    cfg, profiles = _load_inputs(args, workdir)
    out = _resolve(workdir, args.out)
    day = profiles.day(args.day)
    soh = SohState(soh=args.soh if args.soh is not None else cfg.storage.soh_initial)
    if args.u_mwh is not None:
        mode = dispatch.ConstrainedUsage(u_mwh=args.u_mwh)
    else:
        mode = dispatch.DegradationCost(c_usd_per_mwh=args.c_usd_per_mwh)
    inst = dispatch.DispatchInstance(
        gen=cfg.gen, load=cfg.load, storage=cfg.storage, day=day, soh=soh, mode=mode
    )
    logger.info("solving day %d in %s mode", args.day, type(mode).__name__)
    solution = dispatch.solve_dispatch(inst)
    dio.write_dispatch_csv(solution, day, out / "dispatch_schedule.csv")
    summary = {
        "day_index": args.day,
        "mode": type(mode).__name__,
        "soh": soh.soh,
        "system_cost_usd": solution.system_cost_usd,
        "objective_usd": solution.objective_usd,
        "degradation_term_usd": solution.degradation_term_usd,
        "usage_mwh": solution.usage_mwh,
        "cap_dual_usd_per_mwh": solution.cap_dual_usd_per_mwh,
        "solver_status": solution.status,
        "solver_iterations": solution.iterations,
    }
    dio.write_summary_yaml(summary, out / "dispatch_summary.yaml")
    dio.write_manifest(cfg, out / "manifest.yaml", extra={"command": "dispatch"})
    if not args.no_plots:
        plots.dispatch_day_figure(solution, day, out / "dispatch_day.png")
    logger.info("wrote results to %s", out)
    return 0


def _cmd_optimize(args) -> int:
    workdir = _setup(args)
    cfg, profiles = _load_inputs(args, workdir)
    out = _resolve(workdir, args.out)
    plan = dio.plan_from_profiles(cfg, profiles)
    logger.info("optimizing over %d periods (grid dc=%.3g cmax=%.3g)",
                plan.n_periods, cfg.grid.dc_usd_per_mwh, cfg.grid.cmax_usd_per_mwh)
    schedule = horizon.optimize_mcd(
        plan, cfg.grid, include_soh_term=not args.no_soh_term, jobs=args.jobs
    )
    baseline = horizon.no_storage_baseline(plan)
    full = horizon.evaluate_schedule(
        plan, horizon.UsagePolicy(schedule.usage_mwh, label="optimal-mcd"),
        n_periods=plan.n_periods,
    )
    dio.write_schedule_csv(schedule, plan.discount, out / "mcd_schedule.csv")
    dio.write_candidates_csv(schedule, out / "candidates.csv")
    summary = {
        "t_star": schedule.t_star,
        "c_seed_usd_per_mwh": schedule.c_seed,
        "c_terminal_usd_per_mwh": schedule.c_terminal,
        "y_life_usd": schedule.y_life_usd,
        "y_total_usd": schedule.y_total_usd,
        "no_storage_y_usd": baseline.y_usd,
        "savings_usd": baseline.y_usd - full.y_usd,
        "total_usage_mwh": float(schedule.usage_mwh.sum()),
        "include_soh_term": schedule.include_soh_term,
    }
    dio.write_summary_yaml(summary, out / "optimize_summary.yaml")
    dio.write_manifest(cfg, out / "manifest.yaml", extra={"command": "optimize"})
    if not args.no_plots:
        plots.mcd_schedule_figure(schedule, plan.discount, out / "mcd_schedule.png")
        plots.soh_trajectory_figure([("optimal MCD", full)], plan.discount, out / "soh.png")
    logger.info("T*=%d periods, terminal cost %.3f $/MWh, savings %.0f $",
                schedule.t_star, schedule.c_seed, summary["savings_usd"])
    return 0


def _cmd_compare(args) -> int:
    workdir = _setup(args)
    cfg, profiles = _load_inputs(args, workdir)
    out = _resolve(workdir, args.out)
    plan = dio.plan_from_profiles(cfg, profiles)
    logger.info("comparing policies over %d periods", plan.n_periods)
    comp = baselines.compare_policies(plan, cfg.capital, grid=cfg.grid, jobs=args.jobs)
    dio.write_comparison_csv(comp, plan.discount, out / "compare_periods.csv")
    dio.write_schedule_csv(comp.optimal_schedule, plan.discount, out / "mcd_schedule.csv")
    summary = {
        "lcod_usd_per_mwh": comp.lcod_value,
        "policies": comp.savings_table(),
    }
    dio.write_summary_yaml(summary, out / "compare_summary.yaml")
    dio.write_manifest(cfg, out / "manifest.yaml", extra={"command": "compare"})
    if not args.no_plots:
        plots.mcd_schedule_figure(
            comp.optimal_schedule, plan.discount, out / "mcd_schedule.png",
            lcod_value=comp.lcod_value, no_soh_schedule=comp.no_soh_schedule,
        )
        plots.savings_figure(comp, out / "savings.png")
        plots.soh_trajectory_figure(
            [
                ("optimal MCD", comp.optimal),
                ("LCOD", comp.lcod),
                ("zero cost", comp.zero_cost),
            ],
            plan.discount,
            out / "soh.png",
        )
    for name, row in comp.savings_table().items():
        logger.info("%-12s y=%.0f savings=%.0f", name, row["y_usd"], row["savings_usd"])
    return 0


def _fit_line(xs: np.ndarray, ys: np.ndarray) -> dict:
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r_squared": r2}


def _cmd_sweep_bg(args) -> int:
    workdir = _setup(args)
    cfg, profiles = _load_inputs(args, workdir)
    out = _resolve(workdir, args.out)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"--values must be comma-separated numbers: {exc}") from None
    if len(values) < 2:
        raise CliError("--values needs at least two entries to fit a line")
    rows = []
    for b in values:
        cfg_b = dataclasses.replace(cfg, gen=dataclasses.replace(cfg.gen, b_usd_per_mwh=b))
        plan = dio.plan_from_profiles(cfg_b, profiles)
        logger.info("optimizing with generator marginal cost b=%.1f", b)
        schedule = horizon.optimize_mcd(plan, cfg_b.grid, jobs=args.jobs)
        p = plan.discount.periods_per_year
        first_year = float(np.mean(schedule.c_usd_per_mwh[: min(p, schedule.t_star)]))
        rows.append((b, first_year, schedule.c_seed, schedule.t_star))
    xs = np.array([r[0] for r in rows])
    ys = np.array([r[1] for r in rows])
    fit = _fit_line(xs, ys)
    import csv as _csv

    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_bg.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["b_usd_per_mwh", "c_first_year_usd_per_mwh", "c_seed_usd_per_mwh", "t_star"])
        for row in rows:
            writer.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), row[3]])
    dio.write_summary_yaml({"fit": fit, "values": [r[0] for r in rows]}, out / "sweep_bg_summary.yaml")
    dio.write_manifest(cfg, out / "manifest.yaml", extra={"command": "sweep-bg"})
    if not args.no_plots:
        plots.sweep_bg_figure(xs, ys, fit, out / "sweep_bg.png")
    logger.info("fit: slope %.4f, intercept %.3f, R^2 %.4f", fit["slope"], fit["intercept"], fit["r_squared"])
    return 0


def _cmd_validate(args) -> int:
    workdir = _setup(args)
    out = _resolve(workdir, args.out)
    results = checks.run_all(quick=args.quick)
    report = {
        "passed": all(r.passed for r in results),
        "checks": [
            {"name": r.name, "passed": r.passed, "detail": r.detail, "seconds": round(r.seconds, 3)}
            for r in results
        ],
    }
    dio.write_summary_yaml(report, out / "validation_report.yaml")
    for r in results:
        logger.info("%s %-32s %s", "PASS" if r.passed else "FAIL", r.name, r.detail)
    if not report["passed"]:
        logger.error("validation failed")
        return 1
    logger.info("all %d checks passed", len(results))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "dispatch": _cmd_dispatch,
        "optimize": _cmd_optimize,
        "compare": _cmd_compare,
        "sweep-bg": _cmd_sweep_bg,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except CliError as exc:
        parser.error(str(exc))  # exits with code 2
        return 2
    except (QpError, horizon.HorizonError, DegradationError, dispatch.DispatchError, dio.IoError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except FileNotFoundError as exc:
        logger.error("missing input: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
