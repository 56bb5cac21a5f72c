"""Command-line surface: solve, roll, sweep, gen, audit, oracle.

Exit codes: 0 success, 1 input error, 2 solver non-convergence. Every
command echoes a machine-readable metadata block (input digests, effective
config, tool version) on stdout.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from . import __version__
from .dataio import (
    RunConfig,
    audit,
    gen_synthetic_day,
    load_config,
    load_day,
    metadata_block,
    parse_schedule_csv,
    sweep,
    write_load_csv,
    write_prices_csv,
    write_schedule_csv,
    write_sweep_csv,
)
from .domain import InputError
from .model import build_problem, cost_breakdown
from .rolling import roll
from .solver import grid_gap_bound, oracle_solve, solve


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _add_day_args(sub, schedule_out=True):
    sub.add_argument("--prices", required=True, help="prices CSV (timestamp,price_dkk_per_mwh)")
    sub.add_argument("--load", required=True, help="load CSV (timestamp,load_mw)")
    sub.add_argument("--config", help="JSON config file (flat RunConfig keys)")
    if schedule_out:
        sub.add_argument("--out", help="schedule CSV output path")
        sub.add_argument("--summary", help="summary JSON output path")
    _add_override_args(sub)


def _add_override_args(sub):
    sub.add_argument("--wear-price", type=float, dest="wear_price_dkk_per_kwh",
                     help="degradation penalty weight, DKK/kWh")
    sub.add_argument("--penalty-mode", choices=["capacity", "literal"], dest="penalty_mode")
    sub.add_argument("--capacity", type=float, dest="capacity_mwh")
    sub.add_argument("--soc-initial", type=float, dest="soc_initial")
    sub.add_argument("--soc-target", type=float, dest="soc_target")
    sub.add_argument("--eta-charge", type=float, dest="eta_charge")
    sub.add_argument("--eta-discharge", type=float, dest="eta_discharge")
    sub.add_argument("--power-limit", type=float, dest="power_limit_mw")
    sub.add_argument("--grid-limit", type=float, dest="grid_limit_mw")


def _config_from_args(args) -> RunConfig:
    keys = (
        "wear_price_dkk_per_kwh", "penalty_mode", "capacity_mwh", "soc_initial",
        "soc_target", "eta_charge", "eta_discharge", "power_limit_mw", "grid_limit_mw",
    )
    overrides = {k: getattr(args, k, None) for k in keys}
    return load_config(args.config, overrides)


def _emit_metadata(config: RunConfig, paths: dict) -> None:
    print(json.dumps({"metadata": metadata_block(config, paths)}, sort_keys=True))


def _report_dict(report) -> dict:
    d = asdict(report)
    d.pop("schedule")
    d["simultaneity_flags"] = list(report.simultaneity_flags)
    return d


def _write_summary(path, breakdown, report, config, paths, extra=None):
    payload = {
        "cost_breakdown": asdict(breakdown),
        "solver": _report_dict(report),
        "metadata": metadata_block(config, paths),
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_solve(args) -> int:
    config = _config_from_args(args)
    day, stamps = load_day(args.prices, args.load)
    inst = build_problem(day, config.battery_params(),
                         smoothing_eps=config.smoothing_eps,
                         grid_limit_mw=config.grid_limit_mw)
    report = solve(inst, config.solve_options())
    breakdown = cost_breakdown(report.schedule, day, config.battery_params())
    paths = {"prices": args.prices, "load": args.load}
    if args.out:
        write_schedule_csv(args.out, stamps, day, report.schedule, config.battery_params())
    if args.summary:
        _write_summary(args.summary, breakdown, report, config, paths)
    print(f"objective {report.objective:.6f} DKK  termination {report.termination}")
    _emit_metadata(config, paths)
    return 0 if report.termination == "converged" else 2


def _cmd_roll(args) -> int:
    config = _config_from_args(args)
    day, stamps = load_day(args.prices, args.load)
    result = roll(day, config.battery_params(), opts=config.solve_options())
    paths = {"prices": args.prices, "load": args.load}
    if args.out:
        write_schedule_csv(args.out, stamps, day, result.schedule, config.battery_params())
    last = result.step_reports[-1]
    if args.summary:
        _write_summary(args.summary, result.breakdown, last, config, paths,
                       extra={"relaxed_steps": list(result.relaxed_steps)})
    bad = [r for r in result.step_reports if r.termination != "converged"]
    print(f"realized objective {result.breakdown.total_objective:.6f} DKK  "
          f"steps {len(result.step_reports)}  relaxed {len(result.relaxed_steps)}")
    _emit_metadata(config, paths)
    return 0 if not bad else 2


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    day, _ = load_day(args.prices, args.load)
    try:
        weights = [float(w) for w in args.weights.split(",")]
    except ValueError:
        raise InputError(f"--weights must be a comma-separated list of numbers, got {args.weights!r}")
    rows = sweep(day, config, weights)
    if args.out:
        write_sweep_csv(args.out, rows)
    for r in rows:
        print(f"wear_price {r.wear_price_dkk_per_kwh:g}  energy_cost {r.energy_cost:.4f}  "
              f"plet_loss {r.plet_loss:.3e}  reversals {r.soc_reversals}  {r.status}")
    _emit_metadata(config, {"prices": args.prices, "load": args.load})
    return 0 if all(r.status == "converged" for r in rows) else 2


def _cmd_gen(args) -> int:
    day, stamps = gen_synthetic_day(args.seed, args.kind)
    write_prices_csv(args.prices_out, stamps, day.prices)
    write_load_csv(args.load_out, stamps, day.load)
    config = RunConfig()
    print(f"wrote {args.prices_out} and {args.load_out} ({day.grid.steps} steps)")
    _emit_metadata(config, {"prices": args.prices_out, "load": args.load_out})
    return 0


def _cmd_audit(args) -> int:
    config = _config_from_args(args)
    day, _ = load_day(args.prices, args.load)
    schedule, _ = parse_schedule_csv(args.schedule)
    report = audit(schedule, day, config)
    report["metadata"] = metadata_block(
        config, {"prices": args.prices, "load": args.load, "schedule": args.schedule}
    )
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_oracle(args) -> int:
    config = _config_from_args(args)
    day, _ = load_day(args.prices, args.load)
    inst = build_problem(day, config.battery_params(),
                         smoothing_eps=config.smoothing_eps,
                         grid_limit_mw=config.grid_limit_mw)
    oracle = oracle_solve(inst, args.levels)
    report = solve(inst, config.solve_options())
    bound = grid_gap_bound(inst, args.levels)
    print(f"oracle objective {oracle.objective:.9f} DKK ({oracle.message})")
    print(f"solve  objective {report.objective:.9f} DKK")
    print(f"grid-gap bound   {bound:.9f} DKK")
    _emit_metadata(config, {"prices": args.prices, "load": args.load})
    ok = (report.objective <= oracle.objective + 1e-9
          and report.objective >= oracle.objective - bound)
    return 0 if ok and report.termination == "converged" else 2


def build_parser() -> _Parser:
    parser = _Parser(prog="fcsdispatch", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("solve", help="one-shot day-ahead solve")
    _add_day_args(s)
    s.set_defaults(func=_cmd_solve)

    s = subs.add_parser("roll", help="shrinking-horizon re-solve over the day")
    _add_day_args(s)
    s.set_defaults(func=_cmd_roll)

    s = subs.add_parser("sweep", help="solve across a list of wear prices")
    _add_day_args(s, schedule_out=False)
    s.add_argument("--weights", required=True, help="comma-separated wear prices, DKK/kWh")
    s.add_argument("--out", help="sweep table CSV output path")
    s.set_defaults(func=_cmd_sweep)

    s = subs.add_parser("gen", help="generate a synthetic day of prices and load")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--kind", choices=["fcs", "flat"], default="fcs")
    s.add_argument("--prices-out", required=True)
    s.add_argument("--load-out", required=True)
    s.set_defaults(func=_cmd_gen)

    s = subs.add_parser("audit", help="recompute feasibility, wear and rainflow cycles for a schedule")
    _add_day_args(s, schedule_out=False)
    s.add_argument("--schedule", required=True, help="schedule CSV to audit")
    s.add_argument("--out", help="audit JSON output path")
    s.set_defaults(func=_cmd_audit)

    s = subs.add_parser("oracle", help="brute-force enumeration cross-check (small horizons)")
    _add_day_args(s, schedule_out=False)
    s.add_argument("--levels", type=int, default=11, help="grid levels per variable")
    s.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
