"""Shared instance builders for the test suite."""
from __future__ import annotations

import numpy as np

from fcsdispatch.domain import BatteryParams, LoadProfile, PriceSeries, TimeGrid
from fcsdispatch.model import DayInputs, build_problem


def make_day(prices, load, step_hours=0.5) -> DayInputs:
    prices = np.atleast_1d(np.asarray(prices, dtype=float))
    load = np.atleast_1d(np.asarray(load, dtype=float))
    return DayInputs(
        TimeGrid(steps=len(prices), step_hours=step_hours),
        PriceSeries(prices),
        LoadProfile(load),
    )


def two_period_arbitrage(wear_price=0.0, penalty_mode="literal"):
    """Analytic fixture: buy 0.5 MWh at 100, sell at 300 -> objective -100."""
    bat = BatteryParams(
        capacity_mwh=1.0,
        eta_charge=1.0,
        eta_discharge=1.0,
        power_limit_mw=1.0,
        soc_initial=0.0,
        soc_target=0.0,
        wear_price_dkk_per_kwh=wear_price,
        penalty_mode=penalty_mode,
    )
    day = make_day([100.0, 300.0], [0.0, 0.0])
    return build_problem(day, bat)


# Weight at which the full bang-bang swing of the two-period fixture breaks
# even against its wear penalty (literal mode): 100 * 12500 / (2 * 0.5**1.15).
TWO_PERIOD_BREAK_EVEN_WEIGHT = 100.0 * 12500.0 / (2.0 * 0.5**1.15)


def aligned_instance(seed: int, steps: int = 3, wear_price: float = 0.0):
    """Instance whose SoC grid aligns with the oracle's power grid.

    With unit efficiencies and soc_initial = soc_target on the grid, every
    enumerated schedule that passes the oracle's half-grid-step tolerance is
    exactly feasible, so the oracle objective upper-bounds the continuous
    optimum.
    """
    rng = np.random.default_rng(seed)
    bat = BatteryParams(
        capacity_mwh=1.0,
        eta_charge=1.0,
        eta_discharge=1.0,
        power_limit_mw=1.0,
        soc_initial=0.5,
        soc_target=0.5,
        wear_price_dkk_per_kwh=wear_price,
        penalty_mode="capacity",
    )
    prices = rng.uniform(-50.0, 500.0, steps)
    load = rng.uniform(0.0, 1.0, steps)
    return build_problem(make_day(prices, load), bat)


def random_instance(seed: int, steps: int = 48, wear_price: float = 0.0):
    """Generic feasible instance with lossy efficiencies."""
    rng = np.random.default_rng(seed)
    bat = BatteryParams(
        capacity_mwh=2.0,
        eta_charge=0.95,
        eta_discharge=0.95,
        power_limit_mw=1.0,
        soc_initial=0.4,
        soc_target=0.5,
        wear_price_dkk_per_kwh=wear_price,
        penalty_mode="capacity",
    )
    prices = rng.uniform(-100.0, 800.0, steps)
    load = rng.uniform(0.0, 2.5, steps)
    return build_problem(make_day(prices, load), bat)
