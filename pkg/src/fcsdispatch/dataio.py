"""File formats, configuration, synthetic data, sweeps and audits.

CSV formats (ISO-8601 timestamps, strictly increasing, equally spaced):

    prices:   timestamp,price_dkk_per_mwh
    load:     timestamp,load_mw
    schedule: timestamp,price_dkk_per_mwh,load_mw,p_ch_mw,p_dis_mw,p_in_mw,p_out_mw,soc

Floats are written with shortest round-trip repr, so write -> parse is exact
and identical inputs yield byte-identical outputs. Prices are ingested in
DKK/MWh; the wear price is ingested in DKK/kWh and converted inside the
model according to penalty_mode.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from . import __version__
from .degradation import plet_accumulated_loss, rainflow_cycles, rainflow_equivalent_loss
from .domain import (
    BatteryParams,
    DispatchSchedule,
    InputError,
    LoadProfile,
    PriceSeries,
    TimeGrid,
    grid_exchange,
    soc_trajectory,
    validate_feasibility,
)
from .model import (
    DayInputs,
    build_problem,
    cost_breakdown,
    energy_cost_value,
    schedule_to_vector,
)
from .solver import SolveOptions, solve

PRICES_HEADER = ["timestamp", "price_dkk_per_mwh"]
LOAD_HEADER = ["timestamp", "load_mw"]
SCHEDULE_HEADER = [
    "timestamp",
    "price_dkk_per_mwh",
    "load_mw",
    "p_ch_mw",
    "p_dis_mw",
    "p_in_mw",
    "p_out_mw",
    "soc",
]

# Defaults that are plain assumptions rather than externally sourced
# constants; echoed in emitted metadata so consumers can tell them apart.
ASSUMED_DEFAULT_KEYS = (
    "capacity_mwh",
    "eta_charge",
    "eta_discharge",
    "soc_initial",
    "soc_target",
)


class ParseError(InputError):
    """Malformed input file; the message names the offending line."""


@dataclass(frozen=True)
class RunConfig:
    """Flat run configuration; JSON file keys mirror the field names."""

    capacity_mwh: float = 2.0
    eta_charge: float = 0.95
    eta_discharge: float = 0.95
    power_limit_mw: float = 1.0
    soc_initial: float = 0.5
    soc_target: float = 0.5
    cycle_life: float = 12500.0
    peukert_exponent: float = 1.15
    wear_price_dkk_per_kwh: float = 0.0
    penalty_mode: str = "capacity"
    smoothing_eps: float = 0.0
    grid_limit_mw: float | None = None
    tol_feasibility: float = 1e-8
    tol_optimality: float = 1e-6
    max_iterations: int = 50000
    seed: int = 0

    def battery_params(self) -> BatteryParams:
        return BatteryParams(
            capacity_mwh=self.capacity_mwh,
            eta_charge=self.eta_charge,
            eta_discharge=self.eta_discharge,
            power_limit_mw=self.power_limit_mw,
            soc_initial=self.soc_initial,
            soc_target=self.soc_target,
            cycle_life=self.cycle_life,
            peukert_exponent=self.peukert_exponent,
            wear_price_dkk_per_kwh=self.wear_price_dkk_per_kwh,
            penalty_mode=self.penalty_mode,
        )

    def solve_options(self) -> SolveOptions:
        return SolveOptions(
            tol_feasibility=self.tol_feasibility,
            tol_optimality=self.tol_optimality,
            max_iterations=self.max_iterations,
            seed=self.seed,
        )


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config file (optional) and apply explicit overrides on top."""
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise InputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"config file {path}: invalid JSON at line {exc.lineno}") from None
        if not isinstance(data, dict):
            raise ParseError(f"config file {path}: expected a JSON object")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)


def _fmt(value: float) -> str:
    return repr(float(value))


def _parse_timestamp(text: str, line_no: int, path) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(f"{path}:{line_no}: invalid timestamp {text!r}") from None


def _read_timed_csv(path: str | Path, header: list[str]) -> tuple[list[datetime], np.ndarray]:
    """Common reader: header check, numeric parse, monotone equispaced stamps."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows or rows[0] != header:
        raise ParseError(f"{path}:1: expected header {','.join(header)}")
    if len(rows) < 2:
        raise ParseError(f"{path}:1: no data rows")

    timestamps: list[datetime] = []
    values = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
        ts = _parse_timestamp(row[0], line_no, path)
        try:
            nums = [float(v) for v in row[1:]]
        except ValueError:
            raise ParseError(f"{path}:{line_no}: non-numeric field") from None
        if timestamps:
            if ts <= timestamps[-1]:
                raise ParseError(f"{path}:{line_no}: timestamp {row[0]} not after previous row")
        timestamps.append(ts)
        values.append(nums)

    deltas = {timestamps[i + 1] - timestamps[i] for i in range(len(timestamps) - 1)}
    if len(deltas) > 1:
        step = timestamps[1] - timestamps[0]
        for i in range(1, len(timestamps) - 1):
            if timestamps[i + 1] - timestamps[i] != step:
                raise ParseError(
                    f"{path}:{i + 3}: irregular spacing ({timestamps[i + 1] - timestamps[i]} vs {step})"
                )
    return timestamps, np.asarray(values, dtype=float)


def _grid_from_timestamps(timestamps: list[datetime]) -> TimeGrid:
    if len(timestamps) >= 2:
        step_hours = (timestamps[1] - timestamps[0]).total_seconds() / 3600.0
    else:
        step_hours = 0.5
    return TimeGrid(steps=len(timestamps), step_hours=step_hours)


def parse_prices_csv(path: str | Path) -> tuple[PriceSeries, TimeGrid, list[datetime]]:
    timestamps, values = _read_timed_csv(path, PRICES_HEADER)
    return PriceSeries(values[:, 0]), _grid_from_timestamps(timestamps), timestamps


def parse_load_csv(path: str | Path) -> tuple[LoadProfile, TimeGrid, list[datetime]]:
    timestamps, values = _read_timed_csv(path, LOAD_HEADER)
    return LoadProfile(values[:, 0]), _grid_from_timestamps(timestamps), timestamps


def load_day(prices_path: str | Path, load_path: str | Path) -> tuple[DayInputs, list[datetime]]:
    prices, grid_p, stamps_p = parse_prices_csv(prices_path)
    load, grid_l, stamps_l = parse_load_csv(load_path)
    if stamps_p != stamps_l:
        raise InputError(
            f"price and load files disagree on the time grid "
            f"({len(stamps_p)} vs {len(stamps_l)} rows)"
        )
    return DayInputs(grid_p, prices, load), stamps_p


def write_prices_csv(path: str | Path, timestamps: list[datetime], prices: PriceSeries) -> None:
    _write_rows(path, PRICES_HEADER,
                [[ts.isoformat(), _fmt(v)] for ts, v in zip(timestamps, prices.values)])


def write_load_csv(path: str | Path, timestamps: list[datetime], load: LoadProfile) -> None:
    _write_rows(path, LOAD_HEADER,
                [[ts.isoformat(), _fmt(v)] for ts, v in zip(timestamps, load.values)])


def _write_rows(path: str | Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_schedule_csv(
    path: str | Path,
    timestamps: list[datetime],
    day: DayInputs,
    schedule: DispatchSchedule,
    bat: BatteryParams,
) -> None:
    """Emit the full plot-ready schedule table; soc is the end-of-step state."""
    ex = grid_exchange(schedule, day.load)
    traj = soc_trajectory(schedule, bat, day.grid)
    rows = [
        [
            ts.isoformat(),
            _fmt(day.prices.values[t]),
            _fmt(day.load.values[t]),
            _fmt(schedule.p_charge[t]),
            _fmt(schedule.p_discharge[t]),
            _fmt(ex.p_in[t]),
            _fmt(ex.p_out[t]),
            _fmt(traj.soc[t + 1]),
        ]
        for t, ts in enumerate(timestamps)
    ]
    _write_rows(path, SCHEDULE_HEADER, rows)


def parse_schedule_csv(path: str | Path) -> tuple[DispatchSchedule, list[datetime]]:
    timestamps, values = _read_timed_csv(path, SCHEDULE_HEADER)
    return DispatchSchedule(p_charge=values[:, 2], p_discharge=values[:, 3]), timestamps


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def metadata_block(config: RunConfig, input_paths: dict[str, str | Path]) -> dict:
    """Machine-readable provenance attached to every emitted summary."""
    return {
        "tool": "fcsdispatch",
        "version": __version__,
        "inputs": {name: file_digest(p) for name, p in sorted(input_paths.items())},
        "config": asdict(config),
        "assumed_defaults": list(ASSUMED_DEFAULT_KEYS),
    }


def gen_synthetic_day(
    seed: int,
    profile_kind: str = "fcs",
    steps: int = 48,
    step_hours: float = 0.5,
    start: datetime = datetime(2024, 6, 1),
) -> tuple[DayInputs, list[datetime]]:
    """Deterministic synthetic day: spiky fast-charging load over a price curve
    with morning/evening peaks and a mid-day trough. ``flat`` gives constant
    price and load."""
    if profile_kind not in ("fcs", "flat"):
        raise InputError(f"unknown profile kind {profile_kind!r}")
    timestamps = [start + timedelta(hours=step_hours * t) for t in range(steps)]
    hours = np.arange(steps) * step_hours

    if profile_kind == "flat":
        prices = np.full(steps, 300.0)
        load = np.full(steps, 0.3)
    else:
        rng = np.random.default_rng(seed)

        def bump(center, width):
            return np.exp(-0.5 * ((hours - center) / width) ** 2)

        prices = (
            320.0
            + 180.0 * bump(8.0, 1.8)
            + 230.0 * bump(19.0, 2.2)
            - 150.0 * bump(13.5, 2.5)
            + rng.normal(0.0, 12.0, steps)
        )
        load = 0.2 + 0.04 * np.sin(hours / 24.0 * 2 * np.pi - np.pi / 2) + rng.normal(0.0, 0.015, steps)
        # Charging-session spikes: one episode per quarter-day, 1-2 h long.
        quarter = steps // 4
        for q in range(4):
            begin = q * quarter + int(rng.integers(0, max(1, quarter - 4)))
            length = int(rng.integers(2, 5))
            load[begin : begin + length] += rng.uniform(1.2, 2.8)
        load = np.maximum(load, 0.0)

    grid = TimeGrid(steps=steps, step_hours=step_hours)
    return DayInputs(grid, PriceSeries(prices), LoadProfile(load)), timestamps


@dataclass(frozen=True)
class SweepRow:
    wear_price_dkk_per_kwh: float
    energy_cost: float
    arbitrage_revenue: float
    plet_loss: float
    surrogate_penalty: float
    objective: float
    soc_reversals: int
    status: str


def soc_reversal_count(soc: np.ndarray, deadband: float = 1e-4) -> int:
    """Sign changes of the per-step SoC delta, ignoring deltas in a deadband."""
    deltas = np.diff(soc)
    signs = np.sign(deltas[np.abs(deltas) > deadband])
    if len(signs) < 2:
        return 0
    return int(np.sum(signs[1:] != signs[:-1]))


def _sweep_one(day: DayInputs, config: RunConfig, wear_price: float) -> SweepRow:
    bat = replace(config.battery_params(), wear_price_dkk_per_kwh=wear_price)
    inst = build_problem(day, bat, smoothing_eps=config.smoothing_eps,
                         grid_limit_mw=config.grid_limit_mw)
    try:
        report = solve(inst, config.solve_options())
    except Exception as exc:  # a failed point must not kill the sweep
        return SweepRow(wear_price, np.nan, np.nan, np.nan, np.nan, np.nan, 0,
                        f"error: {exc}")
    x = schedule_to_vector(report.schedule)
    breakdown = cost_breakdown(report.schedule, day, bat)
    traj = soc_trajectory(report.schedule, bat, day.grid)
    surrogate_penalty = report.objective - energy_cost_value(x, inst)
    return SweepRow(
        wear_price_dkk_per_kwh=wear_price,
        energy_cost=breakdown.energy_cost,
        arbitrage_revenue=breakdown.arbitrage_revenue,
        plet_loss=breakdown.plet_loss,
        surrogate_penalty=surrogate_penalty,
        objective=report.objective,
        soc_reversals=soc_reversal_count(traj.soc),
        status=report.termination,
    )


def sweep(day: DayInputs, config: RunConfig, wear_prices: list[float]) -> list[SweepRow]:
    """One solve per wear price; failed points are flagged, not fatal.

    Parallelism across points is capped by the FCSD_THREADS env var
    (default 1).
    """
    if len(wear_prices) < 2:
        raise InputError("sweep needs at least 2 wear prices")
    workers = max(1, int(os.environ.get("FCSD_THREADS", "1")))
    if workers == 1:
        return [_sweep_one(day, config, w) for w in wear_prices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda w: _sweep_one(day, config, w), wear_prices))


SWEEP_HEADER = [
    "wear_price_dkk_per_kwh",
    "energy_cost",
    "arbitrage_revenue",
    "plet_loss",
    "surrogate_penalty",
    "objective",
    "soc_reversals",
    "status",
]


def write_sweep_csv(path: str | Path, rows: list[SweepRow]) -> None:
    _write_rows(
        path,
        SWEEP_HEADER,
        [
            [
                _fmt(r.wear_price_dkk_per_kwh),
                _fmt(r.energy_cost),
                _fmt(r.arbitrage_revenue),
                _fmt(r.plet_loss),
                _fmt(r.surrogate_penalty),
                _fmt(r.objective),
                str(r.soc_reversals),
                r.status,
            ]
            for r in rows
        ],
    )


def audit(schedule: DispatchSchedule, day: DayInputs, config: RunConfig) -> dict:
    """Recompute everything derivable from a schedule and report it as JSON-able data.

    Includes feasibility violations, per-step wear, rainflow cycles under
    both residual policies, and simultaneous charge/discharge flags.
    """
    if len(schedule) != day.grid.steps:
        raise InputError(
            f"schedule length {len(schedule)} does not match day length {day.grid.steps}"
        )
    bat = config.battery_params()
    traj = soc_trajectory(schedule, bat, day.grid)
    violations = validate_feasibility(
        schedule, bat, day.grid, tol=config.tol_feasibility * 100,
        grid_limit_mw=config.grid_limit_mw, load=day.load,
    )
    ledger = plet_accumulated_loss(traj, bat)
    half_cycles = rainflow_cycles(traj, close_residual=False)
    closed_cycles = rainflow_cycles(traj, close_residual=True)
    breakdown = cost_breakdown(schedule, day, bat)
    thresh = 1e-6 * bat.power_limit_mw
    simultaneity = np.nonzero(
        np.minimum(schedule.p_charge, schedule.p_discharge) > thresh
    )[0]
    return {
        "violations": [asdict(v) for v in violations],
        "cost_breakdown": asdict(breakdown),
        "soc": traj.soc.tolist(),
        "per_step_loss": ledger.per_step_loss.tolist(),
        "plet_loss": ledger.total_loss,
        "rainflow": {
            "half_residual": {
                "cycles": [asdict(c) for c in half_cycles],
                "equivalent_loss": rainflow_equivalent_loss(half_cycles, bat),
            },
            "closed_residual": {
                "cycles": [asdict(c) for c in closed_cycles],
                "equivalent_loss": rainflow_equivalent_loss(closed_cycles, bat),
            },
        },
        "simultaneity_steps": simultaneity.tolist(),
    }
