"""Shrinking-horizon dispatch driver.

At every step the remaining-day problem is rebuilt from the realized state
of charge and re-solved; only the first action of each plan is committed.
Forecasts are injected through a provider callable, so static (perfect
foresight) and re-forecast operation use the same code path.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .domain import (
    BatteryParams,
    CostBreakdown,
    DispatchSchedule,
    InputError,
    LoadProfile,
    PriceSeries,
    SocTrajectory,
    TimeGrid,
    soc_trajectory,
)
from .model import DayInputs, build_problem, cost_breakdown
from .solver import SolveOptions, SolveReport, check_reachability, solve

# ForecastProvider: step index t -> (prices, load) covering steps t..T-1,
# both of length T - t.
ForecastProvider = Callable[[int], tuple[PriceSeries, LoadProfile]]

DEFAULT_TERMINAL_SOFT_WEIGHT = 1e6


def static_forecast(day: DayInputs) -> ForecastProvider:
    """Perfect-foresight provider: forecasts equal the realized day."""

    def provider(t: int) -> tuple[PriceSeries, LoadProfile]:
        return (
            PriceSeries(day.prices.values[t:]),
            LoadProfile(day.load.values[t:]),
        )

    return provider


@dataclass(frozen=True)
class RollingResult:
    """Realized outcome of one rolled day."""

    schedule: DispatchSchedule
    trajectory: SocTrajectory
    step_reports: tuple[SolveReport, ...]
    breakdown: CostBreakdown
    relaxed_steps: tuple[int, ...]  # steps where the terminal target was softened


def roll(
    day: DayInputs,
    bat: BatteryParams,
    forecasts: ForecastProvider | None = None,
    opts: SolveOptions | None = None,
    terminal_soft_weight: float = DEFAULT_TERMINAL_SOFT_WEIGHT,
) -> RollingResult:
    """Re-solve at every step, commit the first action, advance the realized SoC.

    The realized cost is computed against the realized day, not the
    forecasts. If a mid-day state makes the terminal target unreachable, that
    step's solve relaxes the terminal equality to a soft penalty
    (`terminal_soft_weight` DKK per unit SoC deviation) and the step index is
    recorded in `relaxed_steps`.
    """
    opts = opts or SolveOptions()
    if forecasts is None:
        forecasts = static_forecast(day)
    T = day.grid.steps
    tau = day.grid.step_hours

    committed_ch = np.zeros(T)
    committed_dis = np.zeros(T)
    reports: list[SolveReport] = []
    relaxed: list[int] = []
    realized_soc = bat.soc_initial

    for t in range(T):
        prices, load = forecasts(t)
        if len(prices) != T - t or len(load) != T - t:
            raise InputError(
                f"forecast at step {t} must cover {T - t} steps, got "
                f"{len(prices)} prices / {len(load)} loads"
            )
        sub_day = DayInputs(TimeGrid(T - t, tau), prices, load)
        sub_bat = replace(bat, soc_initial=realized_soc)
        inst = build_problem(sub_day, sub_bat)

        step_opts = opts
        reachable, _ = check_reachability(inst)
        if not reachable:
            step_opts = replace(opts, terminal_soft_weight=terminal_soft_weight)
            relaxed.append(t)
        report = solve(inst, step_opts)
        reports.append(report)

        committed_ch[t] = report.schedule.p_charge[0]
        committed_dis[t] = report.schedule.p_discharge[0]
        realized_soc += (tau / bat.capacity_mwh) * (
            bat.eta_charge * committed_ch[t] - committed_dis[t] / bat.eta_discharge
        )
        # guard against accumulated rounding pushing the state out of [0, 1]
        realized_soc = min(1.0, max(0.0, realized_soc))

    schedule = DispatchSchedule(p_charge=committed_ch, p_discharge=committed_dis)
    return RollingResult(
        schedule=schedule,
        trajectory=soc_trajectory(schedule, bat, day.grid),
        step_reports=tuple(reports),
        breakdown=cost_breakdown(schedule, day, bat),
        relaxed_steps=tuple(relaxed),
    )
