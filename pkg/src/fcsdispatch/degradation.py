"""Power-law battery wear model plus a post-hoc rainflow cycle audit.

The wear model treats lifetime energy throughput as a constant
``n * depth ** exponent`` (Peukert-style), so the capacity fraction lost in
one step of SoC change ``d`` is ``d ** exponent / cycle_life``. This is the
quantity penalized inside the dispatch objective.

Rainflow counting is deliberately kept out of the optimization path (it has
no closed-form expression); it exists here only so audits can compare the
per-step wear total against a cycle-based count of the same trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import BatteryParams, InputError, SocTrajectory


@dataclass(frozen=True)
class CycleRecord:
    """One extracted cycle: SoC depth and weight (0.5 = half, 1.0 = full)."""

    depth: float
    weight: float


@dataclass(frozen=True)
class DegradationLedger:
    """Per-step capacity-fraction losses and their total."""

    per_step_loss: np.ndarray
    total_loss: float


def plet_lifetime_throughput(n_cycles: float, depth: float, exponent: float) -> float:
    """Lifetime throughput for n cycles at a given depth: n * depth ** exponent."""
    if n_cycles < 0:
        raise InputError("n_cycles must be >= 0")
    if not 0 <= depth <= 1:
        raise InputError(f"depth must be in [0, 1], got {depth}")
    if exponent < 1:
        raise InputError("exponent must be >= 1")
    return n_cycles * depth**exponent


def plet_step_loss(delta_soc: float, bat: BatteryParams) -> float:
    """Capacity fraction lost by one step of SoC change of magnitude delta_soc."""
    if delta_soc < 0:
        raise InputError("delta_soc must be >= 0 (pass the magnitude)")
    return delta_soc**bat.peukert_exponent / bat.cycle_life


def plet_accumulated_loss(traj: SocTrajectory, bat: BatteryParams) -> DegradationLedger:
    """Accumulate per-step wear over a SoC trajectory.

    per_step_loss[t] = |soc[t+1] - soc[t]| ** exponent / cycle_life
    """
    deltas = np.abs(np.diff(traj.soc))
    per_step = deltas**bat.peukert_exponent / bat.cycle_life
    per_step.flags.writeable = False
    return DegradationLedger(per_step_loss=per_step, total_loss=float(per_step.sum()))


def _extrema(values: np.ndarray) -> np.ndarray:
    """Reduce a series to its sequence of local extrema (endpoints included)."""
    if len(values) < 2:
        return np.asarray(values, dtype=float)
    out = [values[0]]
    for v in values[1:]:
        if v == out[-1]:
            continue
        if len(out) >= 2 and (out[-1] - out[-2]) * (v - out[-1]) > 0:
            out[-1] = v  # still monotone, extend the current leg
        else:
            out.append(v)
    if len(out) == 1:
        return np.empty(0)
    return np.asarray(out, dtype=float)


def _extract_full_cycles(points: list[float], cycles: list[CycleRecord]) -> list[float]:
    """Four-point rainflow pass: pop closed cycles, return the residual."""
    i = 0
    while len(points) - i >= 4:
        s0, s1, s2, s3 = points[i : i + 4]
        r_prev = abs(s1 - s0)
        r_mid = abs(s2 - s1)
        r_next = abs(s3 - s2)
        if r_mid <= r_prev and r_mid <= r_next:
            cycles.append(CycleRecord(depth=r_mid, weight=1.0))
            del points[i + 1 : i + 3]
            i = max(i - 2, 0)
        else:
            i += 1
    return points


def rainflow_cycles(traj: SocTrajectory, close_residual: bool = False) -> list[CycleRecord]:
    """Four-point rainflow counting over a SoC trajectory.

    Closed cycles carry weight 1.0. The leftover residual sequence is counted
    as half cycles by default; with ``close_residual=True`` the history is
    treated as repeating and the residual is closed into full cycles instead.
    """
    if len(traj) < 2:
        raise InputError("trajectory must have length >= 2")
    turning = _extrema(traj.soc)
    if len(turning) < 2:
        return []

    cycles: list[CycleRecord] = []
    residual = _extract_full_cycles(list(turning), cycles)

    if close_residual:
        # Repeat the residual once and count the cycles that close across the
        # junction; with an alternating residual this pairs every leg.
        doubled = list(_extrema(np.asarray(residual + residual)))
        _extract_full_cycles(doubled, cycles)
    else:
        for a, b in zip(residual, residual[1:]):
            cycles.append(CycleRecord(depth=abs(b - a), weight=0.5))
    return cycles


def rainflow_equivalent_loss(cycles: list[CycleRecord], bat: BatteryParams) -> float:
    """Wear implied by a set of counted cycles: sum of w * depth**k / cycle_life."""
    return float(
        sum(c.weight * c.depth**bat.peukert_exponent for c in cycles) / bat.cycle_life
    )
