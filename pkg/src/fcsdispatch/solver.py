"""Solvers for the dispatch problem plus an independent brute-force oracle.

Two cooperating routes:

* ``solve`` -- the production path. The zero-penalty case is a plain LP and
  goes to scipy's HiGHS backend (vertex-exact answers); the penalized case is
  solved as a convex cone program via cvxpy/Clarabel. Both are deterministic.
* ``oracle_solve`` -- exhaustive enumeration of schedules on a power grid,
  used to cross-check the production path on small instances. It shares no
  code with the solve path beyond objective evaluation.

Optimality is reported as a scaled stationarity residual obtained by fitting
nonnegative multipliers for the active constraints (least squares), so the
measure is independent of whichever backend produced the point.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, lsq_linear

from .domain import InputError, validate_feasibility
from .model import (
    ProblemInstance,
    objective_gradient,
    objective_value,
    penalty_phi,
    penalty_phi_prime,
    vector_to_schedule,
)

ENUMERATION_BUDGET = 100_000_000


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances and limits for a single solve.

    terminal_soft_weight, when set, replaces the hard terminal-SoC equality
    with a penalty of that many DKK per unit of SoC deviation (used by the
    rolling driver when the target has become unreachable).
    """

    tol_feasibility: float = 1e-8
    tol_optimality: float = 1e-6
    max_iterations: int = 50000
    seed: int = 0
    terminal_soft_weight: float | None = None
    tie_break_weight: float = 1e-12

    def __post_init__(self):
        if self.tol_feasibility <= 0 or self.tol_optimality <= 0:
            raise InputError("tolerances must be > 0")


@dataclass(frozen=True)
class SolveReport:
    schedule: DispatchSchedule
    objective: float
    iterations: int
    termination: str  # "converged" | "max_iter" | "infeasible"
    feasibility_residual: float
    optimality_residual: float
    simultaneity_flags: tuple[int, ...]
    terminal_gap: float
    relaxed_terminal: bool
    message: str = ""


def check_reachability(inst: ProblemInstance) -> tuple[bool, str]:
    """Can the terminal SoC be reached from the initial SoC within T steps?"""
    T = inst.n_steps
    limit = inst.bat.power_limit_mw
    required = inst.bat.soc_target - inst.bat.soc_initial
    max_up = T * inst.charge_soc_coeff * limit
    max_down = T * inst.discharge_soc_coeff * limit
    if required > max_up + 1e-12:
        return False, (
            f"terminal SoC unreachable: requires +{required:.6g} SoC but at most "
            f"+{max_up:.6g} is achievable in {T} steps at full charge power"
        )
    if -required > max_down + 1e-12:
        return False, (
            f"terminal SoC unreachable: requires {required:.6g} SoC but at most "
            f"-{max_down:.6g} is achievable in {T} steps at full discharge power"
        )
    return True, ""


def _dynamics_matrix(inst: ProblemInstance) -> np.ndarray:
    """T x 2T map from the decision vector to per-prefix SoC change."""
    T = inst.n_steps
    lower = np.tril(np.ones((T, T)))
    return np.hstack([inst.charge_soc_coeff * lower, -inst.discharge_soc_coeff * lower])


def _tie_break_gradient(inst: ProblemInstance, weight: float) -> np.ndarray:
    T = inst.n_steps
    return weight * np.concatenate(
        [np.full(T, inst.charge_soc_coeff), np.full(T, inst.discharge_soc_coeff)]
    )


def _stationarity_residual(
    x: np.ndarray, inst: ProblemInstance, opts: SolveOptions
) -> float:
    """Scaled norm of grad f + active-constraint normals with fitted multipliers."""
    T = inst.n_steps
    limit = inst.bat.power_limit_mw
    grad = objective_gradient(x, inst) + _tie_break_gradient(inst, opts.tie_break_weight)
    dyn = _dynamics_matrix(inst)
    soc = inst.bat.soc_initial + dyn @ x

    active_tol = 1e-6
    cols: list[np.ndarray] = []
    upper: list[float] = []
    eye = np.eye(2 * T)
    for i in range(2 * T):
        if x[i] <= active_tol:
            cols.append(-eye[i])
            upper.append(np.inf)
        if x[i] >= limit - active_tol:
            cols.append(eye[i])
            upper.append(np.inf)
    for t in range(T):
        if soc[t] <= active_tol:
            cols.append(-dyn[t])
            upper.append(np.inf)
        if soc[t] >= 1 - active_tol:
            cols.append(dyn[t])
            upper.append(np.inf)
    if inst.grid_limit_mw is not None:
        net = x[:T] - x[T:] + inst.day.load.values
        for t in range(T):
            row = np.concatenate([eye[t, :T], -eye[t, :T]])
            if net[t] >= inst.grid_limit_mw - active_tol:
                cols.append(row)
                upper.append(np.inf)
            if net[t] <= -inst.grid_limit_mw + active_tol:
                cols.append(-row)
                upper.append(np.inf)
    # Terminal condition: free-signed multiplier when hard, bounded when soft.
    soft = opts.terminal_soft_weight
    bound = np.inf if soft is None else soft
    cols.append(dyn[-1])
    upper.append(bound)
    cols.append(-dyn[-1])
    upper.append(bound)

    A = np.column_stack(cols)
    res = lsq_linear(A, -grad, bounds=(0.0, np.array(upper)), method="bvls")
    residual = float(np.max(np.abs(A @ res.x + grad)))
    return residual / max(1.0, float(np.max(np.abs(grad))))


def _cancel_simultaneity(x: np.ndarray, inst: ProblemInstance) -> np.ndarray | None:
    """Remove common charge/discharge mass left behind by the interior-point run.

    Subtracting min(p_ch, p_dis) at each step keeps the net grid exchange (and
    hence the energy cost) unchanged while strictly reducing the throughput
    penalty. With unequal efficiencies the cancellation shifts the terminal
    SoC, so the drift is repaired by trimming charge at the step that has the
    most of it. Returns None when there is nothing to cancel or no room to
    repair.
    """
    T = inst.n_steps
    p_ch, p_dis = x[:T].copy(), x[T:].copy()
    m = np.minimum(p_ch, p_dis)
    if not np.any(m > 0.0):
        return None
    p_ch -= m
    p_dis -= m
    drift = (inst.discharge_soc_coeff - inst.charge_soc_coeff) * float(m.sum())
    if drift > 0.0:
        need = drift / inst.charge_soc_coeff
        j = int(np.argmax(p_ch))
        if p_ch[j] < need:
            return None
        p_ch[j] -= need
    return np.concatenate([p_ch, p_dis])


def _simultaneity_flags(x: np.ndarray, inst: ProblemInstance) -> tuple[int, ...]:
    p_ch, p_dis = inst.split(x)
    thresh = 1e-6 * inst.bat.power_limit_mw
    return tuple(int(t) for t in np.nonzero(np.minimum(p_ch, p_dis) > thresh)[0])


def _solve_linear(inst: ProblemInstance, opts: SolveOptions) -> tuple[np.ndarray, int, str]:
    """Zero-penalty case: an LP in the 2T powers (+ terminal slacks if soft)."""
    T = inst.n_steps
    tau = inst.day.grid.step_hours
    p = inst.day.prices.values
    limit = inst.bat.power_limit_mw
    dyn = _dynamics_matrix(inst)
    rhs_target = inst.bat.soc_target - inst.bat.soc_initial

    c = np.concatenate([p * tau, -p * tau]) + _tie_break_gradient(
        inst, opts.tie_break_weight
    )
    soft = opts.terminal_soft_weight
    n_extra = 2 if soft is not None else 0
    if n_extra:
        c = np.concatenate([c, [soft, soft]])

    a_ub_rows = [dyn, -dyn]
    b_ub = np.concatenate([np.full(T, 1.0 - inst.bat.soc_initial),
                           np.full(T, inst.bat.soc_initial)])
    if inst.grid_limit_mw is not None:
        net = np.hstack([np.eye(T), -np.eye(T)])
        a_ub_rows += [net, -net]
        b_ub = np.concatenate([
            b_ub,
            inst.grid_limit_mw - inst.day.load.values,
            inst.grid_limit_mw + inst.day.load.values,
        ])
    a_ub = np.vstack(a_ub_rows)
    if n_extra:
        a_ub = np.hstack([a_ub, np.zeros((a_ub.shape[0], n_extra))])

    a_eq = dyn[-1:].copy()
    if n_extra:
        a_eq = np.hstack([a_eq, [[-1.0, 1.0]]])
    b_eq = np.array([rhs_target])

    bounds = [(0.0, limit)] * (2 * T) + [(0.0, None)] * n_extra
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={"maxiter": opts.max_iterations},
    )
    if not res.success:
        return np.zeros(2 * T), int(getattr(res, "nit", 0)), res.message
    return np.asarray(res.x[: 2 * T]), int(getattr(res, "nit", 0)), ""


def _solve_convex(inst: ProblemInstance, opts: SolveOptions) -> tuple[np.ndarray, int, str]:
    """Penalized case: convex cone program via cvxpy/Clarabel."""
    import cvxpy as cp

    T = inst.n_steps
    tau = inst.day.grid.step_hours
    bat = inst.bat
    limit = bat.power_limit_mw
    p = inst.day.prices.values
    eps = inst.smoothing_eps

    x = cp.Variable(2 * T)
    p_ch, p_dis = x[:T], x[T:]
    s = inst.charge_soc_coeff * p_ch + inst.discharge_soc_coeff * p_dis
    soc = bat.soc_initial + cp.cumsum(
        inst.charge_soc_coeff * p_ch - inst.discharge_soc_coeff * p_dis
    )

    energy = cp.sum(cp.multiply(p * tau, p_ch - p_dis))
    if eps > 0:
        stacked = cp.vstack([cp.reshape(s, (1, T), order="C"),
                             np.full((1, T), eps)])
        phi = (cp.power(cp.norm(stacked, 2, axis=0), bat.peukert_exponent)
               - eps**bat.peukert_exponent)
    else:
        phi = cp.power(s, bat.peukert_exponent)
    penalty = inst.penalty_weight * cp.sum(phi) / bat.cycle_life
    tie = opts.tie_break_weight * cp.sum(s)

    objective = energy + penalty + tie
    constraints = [x >= 0, x <= limit, soc >= 0, soc <= 1]
    rhs_target = bat.soc_target
    soft = opts.terminal_soft_weight
    if soft is None:
        constraints.append(soc[T - 1] == rhs_target)
    else:
        objective = objective + soft * cp.abs(soc[T - 1] - rhs_target)
    if inst.grid_limit_mw is not None:
        net = p_ch - p_dis + inst.day.load.values
        constraints += [net <= inst.grid_limit_mw, net >= -inst.grid_limit_mw]

    prob = cp.Problem(cp.Minimize(objective), constraints)
    try:
        # Silence cvxpy's "solution may be inaccurate" warning: acceptance is
        # decided on the measured residuals of the returned point instead.
        # The RuntimeWarning comes from cvxpy evaluating s**k at tiny negative
        # s before the returned point is clipped to its bounds.
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            warnings.simplefilter("ignore", RuntimeWarning)
            prob.solve(
                solver=cp.CLARABEL,
                max_iter=opts.max_iterations,
                tol_gap_abs=1e-12,
                tol_gap_rel=1e-12,
                tol_feas=1e-12,
            )
    except cp.error.SolverError as exc:
        return np.zeros(2 * T), 0, f"solver error: {exc}"

    iters = 0
    stats = prob.solver_stats
    if stats is not None and stats.num_iters is not None:
        iters = int(stats.num_iters)
    if x.value is None:
        return np.zeros(2 * T), iters, f"no solution returned (status {prob.status})"
    # "optimal_inaccurate" is fine here: convergence is judged on the measured
    # residuals of the returned point, not on the backend's label.
    msg = "" if prob.status in ("optimal", "optimal_inaccurate") else f"status {prob.status}"
    return np.asarray(x.value, dtype=float), iters, msg


def solve(inst: ProblemInstance, opts: SolveOptions | None = None) -> SolveReport:
    """Solve the convex dispatch problem to the documented residual contract.

    Returns a feasible point (within tol_feasibility) whose scaled
    stationarity residual is within tol_optimality; for this convex problem
    that certifies global optimality. An unreachable terminal SoC yields an
    ``infeasible`` report carrying a reachability certificate, unless a soft
    terminal weight is set.
    """
    opts = opts or SolveOptions()
    T = inst.n_steps

    if opts.terminal_soft_weight is None:
        ok, certificate = check_reachability(inst)
        if not ok:
            idle = np.zeros(2 * T)
            return SolveReport(
                schedule=vector_to_schedule(idle, inst),
                objective=objective_value(idle, inst),
                iterations=0,
                termination="infeasible",
                feasibility_residual=np.inf,
                optimality_residual=np.inf,
                simultaneity_flags=(),
                terminal_gap=abs(inst.bat.soc_target - inst.bat.soc_initial),
                relaxed_terminal=False,
                message=certificate,
            )

    if inst.penalty_weight == 0.0:
        x, iterations, message = _solve_linear(inst, opts)
    else:
        x, iterations, message = _solve_convex(inst, opts)

    x = np.clip(x, 0.0, inst.bat.power_limit_mw)
    soft = opts.terminal_soft_weight is not None

    def measure(point: np.ndarray) -> tuple[float, float]:
        violations = validate_feasibility(
            vector_to_schedule(point, inst),
            inst.bat,
            inst.day.grid,
            tol=0.0,
            grid_limit_mw=inst.grid_limit_mw,
            load=inst.day.load if inst.grid_limit_mw is not None else None,
        )
        gap = 0.0
        worst = 0.0
        for v in violations:
            if v.constraint == "terminal_soc":
                gap = v.magnitude
                if soft:
                    continue
            worst = max(worst, v.magnitude)
        return worst, gap

    feas, terminal_gap = measure(x)
    cand = _cancel_simultaneity(x, inst)
    if cand is not None:
        tb = _tie_break_gradient(inst, opts.tie_break_weight)
        cand_feas, cand_gap = measure(cand)
        better_obj = (objective_value(cand, inst) + tb @ cand
                      <= objective_value(x, inst) + tb @ x)
        if better_obj and cand_feas <= max(feas, 1e-12):
            x, feas, terminal_gap = cand, cand_feas, cand_gap

    schedule = vector_to_schedule(x, inst)

    optimality = _stationarity_residual(x, inst, opts)
    converged = (
        message == ""
        and feas <= opts.tol_feasibility
        and optimality <= opts.tol_optimality
    )
    return SolveReport(
        schedule=schedule,
        objective=objective_value(x, inst),
        iterations=iterations,
        termination="converged" if converged else "max_iter",
        feasibility_residual=feas,
        optimality_residual=optimality,
        simultaneity_flags=_simultaneity_flags(x, inst),
        terminal_gap=terminal_gap,
        relaxed_terminal=soft,
        message=message,
    )


def _level_grid(inst: ProblemInstance, levels: int) -> np.ndarray:
    return np.linspace(0.0, inst.bat.power_limit_mw, levels)


def oracle_solve(inst: ProblemInstance, levels: int = 11) -> SolveReport:
    """Exhaustively enumerate schedules on a power grid and return the best.

    Every decision variable ranges over `levels` equispaced values in
    [0, power_limit]. Candidates are kept if they satisfy the SoC box and
    terminal condition within half a SoC grid step. The enumeration budget
    levels**(2T) <= 1e8 is enforced up front.
    """
    if levels < 2:
        raise InputError("levels must be >= 2")
    T = inst.n_steps
    if levels ** (2 * T) > ENUMERATION_BUDGET:
        raise InputError(
            f"enumeration budget exceeded: {levels}**{2 * T} > {ENUMERATION_BUDGET:.0e}"
        )

    tau = inst.day.grid.step_hours
    bat = inst.bat
    vals = _level_grid(inst, levels)
    delta = bat.power_limit_mw / (levels - 1)
    soc_step = max(inst.charge_soc_coeff, inst.discharge_soc_coeff) * delta
    tol = soc_step / 2

    combos = np.array(list(itertools.product(vals, repeat=T)))  # (levels**T, T)
    n = len(combos)
    cum = np.cumsum(combos, axis=1)
    ch_soc = inst.charge_soc_coeff * cum
    dis_soc = inst.discharge_soc_coeff * cum
    price_energy = combos @ (inst.day.prices.values * tau)
    load_cost = float(np.dot(inst.day.load.values, inst.day.prices.values) * tau)

    best_obj = np.inf
    best = None
    chunk = max(1, int(5_000_000 / max(1, n * T)))
    for start in range(0, n, chunk):
        ch = combos[start : start + chunk]
        soc = bat.soc_initial + ch_soc[start : start + chunk, None, :] - dis_soc[None, :, :]
        feasible = (
            (soc >= -tol).all(axis=2)
            & (soc <= 1 + tol).all(axis=2)
            & (np.abs(soc[:, :, -1] - bat.soc_target) <= tol)
        )
        if inst.grid_limit_mw is not None:
            net = ch[:, None, :] - combos[None, :, :] + inst.day.load.values
            feasible &= (np.abs(net) <= inst.grid_limit_mw + 1e-12).all(axis=2)
        if not feasible.any():
            continue
        s = (inst.charge_soc_coeff * ch[:, None, :]
             + inst.discharge_soc_coeff * combos[None, :, :])
        obj = price_energy[start : start + chunk, None] - price_energy[None, :] + load_cost
        if inst.penalty_weight:
            obj = obj + inst.penalty_weight * penalty_phi(
                s, inst.smoothing_eps, bat.peukert_exponent, bat.cycle_life
            ).sum(axis=2)
        obj = obj + 1e-12 * s.sum(axis=2)  # same tie-break as the solve path
        obj = np.where(feasible, obj, np.inf)
        idx = np.unravel_index(np.argmin(obj), obj.shape)
        if obj[idx] < best_obj:
            best_obj = float(obj[idx])
            best = (start + idx[0], idx[1])

    if best is None:
        idle = np.zeros(2 * T)
        return SolveReport(
            schedule=vector_to_schedule(idle, inst),
            objective=np.inf,
            iterations=n * n,
            termination="infeasible",
            feasibility_residual=np.inf,
            optimality_residual=np.inf,
            simultaneity_flags=(),
            terminal_gap=np.inf,
            relaxed_terminal=False,
            message="no feasible grid point at half-grid-step tolerance",
        )

    x = np.concatenate([combos[best[0]], combos[best[1]]])
    return SolveReport(
        schedule=vector_to_schedule(x, inst),
        objective=objective_value(x, inst),
        iterations=n * n,
        termination="converged",
        feasibility_residual=tol,
        optimality_residual=np.inf,
        simultaneity_flags=_simultaneity_flags(x, inst),
        terminal_gap=float(
            abs(bat.soc_initial
                + inst.charge_soc_coeff * combos[best[0]].sum()
                - inst.discharge_soc_coeff * combos[best[1]].sum()
                - bat.soc_target)
        ),
        relaxed_terminal=False,
        message=f"enumerated {n * n} grid schedules at {levels} levels",
    )


def grid_gap_bound(inst: ProblemInstance, levels: int) -> float:
    """Analytic bound on (best grid objective - continuous optimum).

    A feasible grid point within one grid cell of the optimum always exists
    (round each power, steering the rounding direction to keep the running
    SoC error within half a SoC grid step), so the gap is bounded by the sum
    over coordinates of (per-coordinate gradient bound) * (grid spacing).
    """
    tau = inst.day.grid.step_hours
    bat = inst.bat
    delta = bat.power_limit_mw / (levels - 1)
    s_max = (inst.charge_soc_coeff + inst.discharge_soc_coeff) * bat.power_limit_mw
    dphi_max = float(
        penalty_phi_prime(s_max, inst.smoothing_eps, bat.peukert_exponent, bat.cycle_life)
    )
    p_abs = np.abs(inst.day.prices.values)
    l_ch = p_abs * tau + inst.penalty_weight * dphi_max * inst.charge_soc_coeff
    l_dis = p_abs * tau + inst.penalty_weight * dphi_max * inst.discharge_soc_coeff
    return float((l_ch + l_dis).sum() * delta) + 1e-9
