"""Wear-aware day-ahead dispatch scheduling for a fast-charging-station battery."""

__version__ = "0.1.0"

from .domain import (  # noqa: E402
    BatteryParams,
    CostBreakdown,
    DispatchSchedule,
    GridExchange,
    InputError,
    LoadProfile,
    PriceSeries,
    SocTrajectory,
    TimeGrid,
    Violation,
    grid_exchange,
    soc_trajectory,
    validate_feasibility,
)
from .degradation import (  # noqa: E402
    CycleRecord,
    DegradationLedger,
    plet_accumulated_loss,
    plet_lifetime_throughput,
    plet_step_loss,
    rainflow_cycles,
    rainflow_equivalent_loss,
)
from .model import (  # noqa: E402
    DayInputs,
    ProblemInstance,
    build_problem,
    cost_breakdown,
    objective_gradient,
    objective_value,
)
from .solver import SolveOptions, SolveReport, oracle_solve, solve  # noqa: E402
from .rolling import RollingResult, roll, static_forecast  # noqa: E402
from .dataio import RunConfig, audit, gen_synthetic_day, load_day, sweep  # noqa: E402

__all__ = [
    "BatteryParams",
    "CostBreakdown",
    "CycleRecord",
    "DayInputs",
    "DegradationLedger",
    "DispatchSchedule",
    "GridExchange",
    "InputError",
    "LoadProfile",
    "PriceSeries",
    "ProblemInstance",
    "RollingResult",
    "RunConfig",
    "SocTrajectory",
    "SolveOptions",
    "SolveReport",
    "TimeGrid",
    "Violation",
    "audit",
    "build_problem",
    "cost_breakdown",
    "gen_synthetic_day",
    "grid_exchange",
    "load_day",
    "objective_gradient",
    "objective_value",
    "oracle_solve",
    "plet_accumulated_loss",
    "plet_lifetime_throughput",
    "plet_step_loss",
    "rainflow_cycles",
    "rainflow_equivalent_loss",
    "roll",
    "soc_trajectory",
    "solve",
    "static_forecast",
    "sweep",
    "validate_feasibility",
]
