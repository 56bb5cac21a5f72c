"""HTTP wrapper around the core package for multi-client use.

Run with: uvicorn fcsdispatch.service:app

The endpoints accept raw series (no files): prices in DKK/MWh, load in MW,
plus any RunConfig overrides. The CLI remains the file-based surface; this
service exposes the same operations over JSON.
"""
from __future__ import annotations

from dataclasses import asdict

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .dataio import RunConfig, audit, gen_synthetic_day, sweep
from .domain import DispatchSchedule, InputError, LoadProfile, PriceSeries, TimeGrid
from .model import DayInputs, build_problem, cost_breakdown
from .rolling import roll
from .solver import solve

app = FastAPI(title="fcsdispatch", version=__version__)


class ConfigModel(BaseModel):
    """Subset of RunConfig accepted over the wire; unset fields use defaults."""

    capacity_mwh: float | None = None
    eta_charge: float | None = None
    eta_discharge: float | None = None
    power_limit_mw: float | None = None
    soc_initial: float | None = None
    soc_target: float | None = None
    cycle_life: float | None = None
    peukert_exponent: float | None = None
    wear_price_dkk_per_kwh: float | None = None
    penalty_mode: str | None = None
    smoothing_eps: float | None = None
    grid_limit_mw: float | None = None

    def to_config(self) -> RunConfig:
        overrides = {k: v for k, v in self.model_dump().items() if v is not None}
        return RunConfig(**overrides)


class DayModel(BaseModel):
    prices_dkk_per_mwh: list[float]
    load_mw: list[float]
    step_hours: float = 0.5


class SolveRequest(BaseModel):
    day: DayModel
    config: ConfigModel = Field(default_factory=ConfigModel)
    rolling: bool = False


class SweepRequest(BaseModel):
    day: DayModel
    config: ConfigModel = Field(default_factory=ConfigModel)
    wear_prices: list[float]


class AuditRequest(BaseModel):
    day: DayModel
    config: ConfigModel = Field(default_factory=ConfigModel)
    p_charge_mw: list[float]
    p_discharge_mw: list[float]


class GenerateRequest(BaseModel):
    seed: int = 42
    kind: str = "fcs"


def _day_inputs(day: DayModel) -> DayInputs:
    grid = TimeGrid(steps=len(day.prices_dkk_per_mwh), step_hours=day.step_hours)
    return DayInputs(grid, PriceSeries(day.prices_dkk_per_mwh), LoadProfile(day.load_mw))


def _bad_request(exc: InputError) -> HTTPException:
    return HTTPException(status_code=422, detail=str(exc))


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/solve")
def solve_endpoint(req: SolveRequest) -> dict:
    try:
        config = req.config.to_config()
        day = _day_inputs(req.day)
        bat = config.battery_params()
        if req.rolling:
            result = roll(day, bat, opts=config.solve_options())
            report = result.step_reports[-1]
            schedule = result.schedule
            breakdown = result.breakdown
            extra = {"relaxed_steps": list(result.relaxed_steps)}
        else:
            inst = build_problem(day, bat, smoothing_eps=config.smoothing_eps,
                                 grid_limit_mw=config.grid_limit_mw)
            report = solve(inst, config.solve_options())
            schedule = report.schedule
            breakdown = cost_breakdown(schedule, day, bat)
            extra = {}
    except InputError as exc:
        raise _bad_request(exc) from None
    solver = asdict(report)
    solver.pop("schedule")
    solver["simultaneity_flags"] = list(report.simultaneity_flags)
    return {
        "p_charge_mw": schedule.p_charge.tolist(),
        "p_discharge_mw": schedule.p_discharge.tolist(),
        "cost_breakdown": asdict(breakdown),
        "solver": solver,
        **extra,
    }


@app.post("/sweep")
def sweep_endpoint(req: SweepRequest) -> dict:
    try:
        rows = sweep(_day_inputs(req.day), req.config.to_config(), req.wear_prices)
    except InputError as exc:
        raise _bad_request(exc) from None
    return {"rows": [asdict(r) for r in rows]}


@app.post("/audit")
def audit_endpoint(req: AuditRequest) -> dict:
    try:
        schedule = DispatchSchedule(p_charge=req.p_charge_mw, p_discharge=req.p_discharge_mw)
        return audit(schedule, _day_inputs(req.day), req.config.to_config())
    except InputError as exc:
        raise _bad_request(exc) from None


@app.post("/generate")
def generate_endpoint(req: GenerateRequest) -> dict:
    try:
        day, stamps = gen_synthetic_day(req.seed, req.kind)
    except InputError as exc:
        raise _bad_request(exc) from None
    return {
        "timestamps": [ts.isoformat() for ts in stamps],
        "prices_dkk_per_mwh": day.prices.values.tolist(),
        "load_mw": day.load.values.tolist(),
        "step_hours": day.grid.step_hours,
    }
