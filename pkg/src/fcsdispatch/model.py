"""Assembles the dispatch problem: objective, gradient and cost breakdown.

The decision vector is x = [p_charge[0..T-1], p_discharge[0..T-1]] (2T
variables, each bounded by [0, power_limit]). The objective is

    energy cost:  sum_t (p_charge - p_discharge + load) * price * tau
    wear penalty: W * sum_t phi_eps(s[t])

where s[t] = (tau / capacity) * (eta_ch * p_charge + p_discharge / eta_dis)
is a convex throughput surrogate that upper-bounds the per-step |SoC change|
(equality when the battery does not charge and discharge simultaneously and
efficiencies are 1), and

    phi_eps(s) = ((s^2 + eps^2)^(k/2) - eps^k) / cycle_life.

With eps = 0 this is the plain power law s^k / cycle_life; it is then still
differentiable at 0 because k > 1. Using the surrogate instead of |SoC
change| keeps the problem convex and additionally penalizes simultaneous
charge/discharge.

The penalty weight W resolves the units of the wear price (DKK/kWh) against
the dimensionless capacity-fraction loss:

    penalty_mode="capacity": W = wear_price * 1000 * capacity_mwh
        (a unit of lost capacity fraction is priced at the replacement value
        of the pack in kWh) -- the default, dimensionally coherent choice;
    penalty_mode="literal":  W = wear_price, applied unscaled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .degradation import plet_accumulated_loss
from .domain import (
    BatteryParams,
    CostBreakdown,
    DispatchSchedule,
    GridExchange,
    InputError,
    LoadProfile,
    PriceSeries,
    TimeGrid,
    grid_exchange,
    soc_trajectory,
)


@dataclass(frozen=True)
class DayInputs:
    """One scheduling horizon: time grid, prices and load, all length T."""

    grid: TimeGrid
    prices: PriceSeries
    load: LoadProfile

    def __post_init__(self):
        if len(self.prices) != self.grid.steps or len(self.load) != self.grid.steps:
            raise InputError(
                f"prices ({len(self.prices)}) and load ({len(self.load)}) must both "
                f"have length {self.grid.steps}"
            )


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable, fully assembled problem ready for a solver.

    charge_soc_coeff / discharge_soc_coeff map power (MW) to SoC change per
    step; penalty_weight is W as described in the module docstring.
    """

    day: DayInputs
    bat: BatteryParams
    penalty_weight: float
    smoothing_eps: float
    charge_soc_coeff: float
    discharge_soc_coeff: float
    grid_limit_mw: float | None

    @property
    def n_steps(self) -> int:
        return self.day.grid.steps

    @property
    def n_variables(self) -> int:
        return 2 * self.day.grid.steps

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        T = self.n_steps
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * T,):
            raise InputError(f"x must have shape ({2 * T},), got {x.shape}")
        return x[:T], x[T:]


def penalty_weight(bat: BatteryParams) -> float:
    if bat.penalty_mode == "capacity":
        return bat.wear_price_dkk_per_kwh * 1000.0 * bat.capacity_mwh
    return bat.wear_price_dkk_per_kwh


def build_problem(
    day: DayInputs,
    bat: BatteryParams,
    smoothing_eps: float = 0.0,
    grid_limit_mw: float | None = None,
) -> ProblemInstance:
    """Assemble an immutable ProblemInstance from a day's data and a battery."""
    if smoothing_eps < 0:
        raise InputError("smoothing_eps must be >= 0")
    tau = day.grid.step_hours
    if not tau > 0 or not bat.capacity_mwh > 0:
        raise InputError("step_hours and capacity_mwh must be > 0")
    return ProblemInstance(
        day=day,
        bat=bat,
        penalty_weight=penalty_weight(bat),
        smoothing_eps=smoothing_eps,
        charge_soc_coeff=tau * bat.eta_charge / bat.capacity_mwh,
        discharge_soc_coeff=tau / (bat.eta_discharge * bat.capacity_mwh),
        grid_limit_mw=grid_limit_mw,
    )


def penalty_phi(s, eps: float, exponent: float, cycle_life: float):
    """Smoothed power-law wear penalty, elementwise."""
    s = np.asarray(s, dtype=float)
    if eps == 0.0:
        return s**exponent / cycle_life
    return ((s**2 + eps**2) ** (exponent / 2) - eps**exponent) / cycle_life


def penalty_phi_prime(s, eps: float, exponent: float, cycle_life: float):
    """Derivative of penalty_phi; 0 at s = 0 when eps = 0 (valid for k > 1)."""
    s = np.asarray(s, dtype=float)
    if eps == 0.0:
        out = np.zeros_like(s)
        nz = s != 0
        out[nz] = exponent * np.abs(s[nz]) ** (exponent - 1) * np.sign(s[nz])
        return out / cycle_life
    return exponent * s * (s**2 + eps**2) ** (exponent / 2 - 1) / cycle_life


def throughput_surrogate(x: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """The per-step surrogate s[t] for |SoC change|, always >= 0 for x >= 0."""
    p_ch, p_dis = inst.split(x)
    return inst.charge_soc_coeff * p_ch + inst.discharge_soc_coeff * p_dis


def energy_cost_value(x: np.ndarray, inst: ProblemInstance) -> float:
    p_ch, p_dis = inst.split(x)
    tau = inst.day.grid.step_hours
    net = p_ch - p_dis + inst.day.load.values
    return float(np.dot(net, inst.day.prices.values) * tau)


def objective_value(x: np.ndarray, inst: ProblemInstance) -> float:
    """Energy cost plus weighted wear penalty; defined for any finite x."""
    bat = inst.bat
    s = throughput_surrogate(x, inst)
    pen = penalty_phi(s, inst.smoothing_eps, bat.peukert_exponent, bat.cycle_life)
    return energy_cost_value(x, inst) + inst.penalty_weight * float(pen.sum())


def objective_gradient(x: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """Analytic gradient of objective_value with respect to x."""
    bat = inst.bat
    tau = inst.day.grid.step_hours
    s = throughput_surrogate(x, inst)
    dphi = penalty_phi_prime(s, inst.smoothing_eps, bat.peukert_exponent, bat.cycle_life)
    p = inst.day.prices.values
    g_ch = p * tau + inst.penalty_weight * dphi * inst.charge_soc_coeff
    g_dis = -p * tau + inst.penalty_weight * dphi * inst.discharge_soc_coeff
    return np.concatenate([g_ch, g_dis])


def schedule_to_vector(schedule: DispatchSchedule) -> np.ndarray:
    return np.concatenate([schedule.p_charge, schedule.p_discharge])


def vector_to_schedule(x: np.ndarray, inst: ProblemInstance) -> DispatchSchedule:
    p_ch, p_dis = inst.split(x)
    return DispatchSchedule(p_charge=p_ch, p_discharge=p_dis)


def cost_breakdown(
    schedule: DispatchSchedule, day: DayInputs, bat: BatteryParams
) -> CostBreakdown:
    """Evaluate the reported cost decomposition for a (near-)feasible schedule.

    The wear entry here uses the actual |SoC change| of the realized
    trajectory, not the convex surrogate, so it never exceeds the penalty
    term used inside the optimization.
    """
    tau = day.grid.step_hours
    ex: GridExchange = grid_exchange(schedule, day.load)
    energy_cost = float(np.dot(ex.p_in - ex.p_out, day.prices.values) * tau)
    baseline_cost = float(np.dot(day.load.values, day.prices.values) * tau)
    traj = soc_trajectory(schedule, bat, day.grid)
    ledger = plet_accumulated_loss(traj, bat)
    degradation_cost = penalty_weight(bat) * ledger.total_loss
    return CostBreakdown(
        energy_cost=energy_cost,
        baseline_cost=baseline_cost,
        arbitrage_revenue=baseline_cost - energy_cost,
        plet_loss=ledger.total_loss,
        degradation_cost=degradation_cost,
        total_objective=energy_cost + degradation_cost,
    )
