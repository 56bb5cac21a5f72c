"""Core data types and pure derivations for battery dispatch scheduling.

Everything here is deterministic and side-effect free: given a candidate
charge/discharge schedule, these functions derive the state-of-charge path,
the net grid exchange and the list of constraint violations. All types are
frozen dataclasses holding read-only numpy arrays, so they can be shared
freely between threads.

Canonical internal units: MW, MWh, hours, DKK/MWh. State of charge is a
dimensionless fraction in [0, 1].
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class InputError(ValueError):
    """Raised when caller-supplied data violates a documented precondition."""


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform scheduling grid: number of steps and the step length in hours."""

    steps: int
    step_hours: float

    def __post_init__(self):
        if self.steps < 1:
            raise InputError(f"steps must be >= 1, got {self.steps}")
        if not self.step_hours > 0:
            raise InputError(f"step_hours must be > 0, got {self.step_hours}")


@dataclass(frozen=True)
class PriceSeries:
    """Spot prices per step, DKK/MWh. Negative prices are allowed."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, "prices"))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class LoadProfile:
    """Exogenous station demand per step, MW, nonnegative."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, "load"))
        if np.any(self.values < 0):
            raise InputError("load values must be >= 0")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BatteryParams:
    """Physical and economic battery constants.

    Attributes:
        capacity_mwh: Usable energy capacity (MWh).
        eta_charge: Charge efficiency in (0, 1].
        eta_discharge: Discharge efficiency in (0, 1].
        power_limit_mw: Symmetric charge/discharge power limit (MW).
        soc_initial: State of charge at the start of the horizon.
        soc_target: Required state of charge at the end of the horizon.
        cycle_life: Lifetime throughput constant of the power-law wear model
            (full cycles at unit depth).
        peukert_exponent: Power-law exponent of the wear model; physically
            meaningful values lie in [1.1, 1.3].
        wear_price_dkk_per_kwh: Penalty weight applied to battery wear,
            DKK per kWh of throughput-equivalent usage.
        penalty_mode: How the wear price is scaled into the objective:
            "capacity" prices a unit of lost capacity fraction at the
            replacement value of the pack (wear_price * 1000 * capacity_mwh);
            "literal" applies wear_price_dkk_per_kwh unscaled.
    """

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

    def __post_init__(self):
        if not self.capacity_mwh > 0:
            raise InputError("capacity_mwh must be > 0")
        if not 0 < self.eta_charge <= 1:
            raise InputError("eta_charge must be in (0, 1]")
        if not 0 < self.eta_discharge <= 1:
            raise InputError("eta_discharge must be in (0, 1]")
        if not self.power_limit_mw > 0:
            raise InputError("power_limit_mw must be > 0")
        if not 0 <= self.soc_initial <= 1:
            raise InputError("soc_initial must be in [0, 1]")
        if not 0 <= self.soc_target <= 1:
            raise InputError("soc_target must be in [0, 1]")
        if not self.cycle_life > 0:
            raise InputError("cycle_life must be > 0")
        if self.peukert_exponent < 1:
            raise InputError("peukert_exponent must be >= 1")
        if not (1.1 <= self.peukert_exponent <= 1.3):
            warnings.warn(
                f"peukert_exponent {self.peukert_exponent} is outside the "
                "typical [1.1, 1.3] range",
                stacklevel=2,
            )
        if self.wear_price_dkk_per_kwh < 0:
            raise InputError("wear_price_dkk_per_kwh must be >= 0")
        if self.penalty_mode not in ("capacity", "literal"):
            raise InputError(
                f"penalty_mode must be 'capacity' or 'literal', got {self.penalty_mode!r}"
            )


@dataclass(frozen=True)
class DispatchSchedule:
    """Per-step charge and discharge power decisions, MW."""

    p_charge: np.ndarray
    p_discharge: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_charge", _frozen_array(self.p_charge, "p_charge"))
        object.__setattr__(
            self, "p_discharge", _frozen_array(self.p_discharge, "p_discharge")
        )
        if len(self.p_charge) != len(self.p_discharge):
            raise InputError("p_charge and p_discharge must have equal length")

    def __len__(self) -> int:
        return len(self.p_charge)


@dataclass(frozen=True)
class SocTrajectory:
    """State-of-charge path of length T+1; soc[0] is the initial state."""

    soc: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "soc", _frozen_array(self.soc, "soc"))
        if len(self.soc) < 1:
            raise InputError("soc trajectory must not be empty")

    def __len__(self) -> int:
        return len(self.soc)


@dataclass(frozen=True)
class GridExchange:
    """Net energy flow split into import (p_in) and export (p_out), MW.

    At most one of p_in[t], p_out[t] is nonzero at every step.
    """

    p_in: np.ndarray
    p_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_in", _frozen_array(self.p_in, "p_in"))
        object.__setattr__(self, "p_out", _frozen_array(self.p_out, "p_out"))


@dataclass(frozen=True)
class CostBreakdown:
    """Decomposition of the daily objective.

    Identities (exact by construction):
        arbitrage_revenue = baseline_cost - energy_cost
        total_objective  = energy_cost + degradation_cost
    """

    energy_cost: float
    baseline_cost: float
    arbitrage_revenue: float
    plet_loss: float
    degradation_cost: float
    total_objective: float


@dataclass(frozen=True)
class Violation:
    """One feasibility breach: which constraint, at which step, by how much."""

    constraint: str
    step: int
    magnitude: float


def soc_increments(schedule: DispatchSchedule, bat: BatteryParams, grid: TimeGrid) -> np.ndarray:
    """Per-step SoC change implied by a schedule (no clamping)."""
    if len(schedule) != grid.steps:
        raise InputError(
            f"schedule length {len(schedule)} does not match grid steps {grid.steps}"
        )
    scale = grid.step_hours / bat.capacity_mwh
    return scale * (
        bat.eta_charge * schedule.p_charge - schedule.p_discharge / bat.eta_discharge
    )


def soc_trajectory(schedule: DispatchSchedule, bat: BatteryParams, grid: TimeGrid) -> SocTrajectory:
    """Integrate the SoC recursion over the horizon.

    soc[t] = soc[t-1] + (tau / capacity) * (eta_ch * p_charge[t] - p_discharge[t] / eta_dis)

    The result is exact to machine precision and is not clamped to [0, 1];
    use validate_feasibility to check the box.
    """
    increments = soc_increments(schedule, bat, grid)
    soc = np.empty(grid.steps + 1)
    soc[0] = bat.soc_initial
    np.cumsum(increments, out=soc[1:])
    soc[1:] += bat.soc_initial
    return SocTrajectory(soc)


def grid_exchange(schedule: DispatchSchedule, load: LoadProfile) -> GridExchange:
    """Split the net station balance into grid import and export.

    net[t] = p_charge[t] - p_discharge[t] + load[t]; import is the positive
    part, export the negative part, so p_in - p_out reproduces net exactly.
    """
    if len(schedule) != len(load):
        raise InputError(
            f"schedule length {len(schedule)} does not match load length {len(load)}"
        )
    net = schedule.p_charge - schedule.p_discharge + load.values
    return GridExchange(p_in=np.maximum(net, 0.0), p_out=np.maximum(-net, 0.0))


def validate_feasibility(
    schedule: DispatchSchedule,
    bat: BatteryParams,
    grid: TimeGrid,
    tol: float = 1e-6,
    grid_limit_mw: float | None = None,
    load: LoadProfile | None = None,
) -> list[Violation]:
    """Check a schedule against power bounds, the SoC box and the terminal target.

    Returns an empty list iff the schedule is feasible within `tol`. Each
    violation names the constraint, the step index and the breach magnitude.
    When `grid_limit_mw` is given (and a load profile to evaluate it against),
    |net exchange| <= grid_limit_mw is checked as well.
    """
    if tol < 0:
        raise InputError("tol must be >= 0")
    violations: list[Violation] = []

    def check(mask_values, name, limit_low=None, limit_high=None):
        for t, v in enumerate(mask_values):
            if limit_low is not None and v < limit_low - tol:
                violations.append(Violation(name + "_lower", t, limit_low - v))
            if limit_high is not None and v > limit_high + tol:
                violations.append(Violation(name + "_upper", t, v - limit_high))

    check(schedule.p_charge, "charge_power", 0.0, bat.power_limit_mw)
    check(schedule.p_discharge, "discharge_power", 0.0, bat.power_limit_mw)

    traj = soc_trajectory(schedule, bat, grid)
    check(traj.soc, "soc", 0.0, 1.0)

    terminal_gap = abs(traj.soc[-1] - bat.soc_target)
    if terminal_gap > tol:
        violations.append(Violation("terminal_soc", grid.steps, terminal_gap))

    if grid_limit_mw is not None and load is not None:
        net = schedule.p_charge - schedule.p_discharge + load.values
        check(np.abs(net), "grid_limit", None, grid_limit_mw)

    return violations
