import numpy as np
import pytest

from fcsdispatch.domain import BatteryParams, InputError, validate_feasibility
from fcsdispatch.model import build_problem, schedule_to_vector
from fcsdispatch.solver import (
    SolveOptions,
    check_reachability,
    grid_gap_bound,
    oracle_solve,
    solve,
)
from helpers import (
    TWO_PERIOD_BREAK_EVEN_WEIGHT,
    aligned_instance,
    make_day,
    random_instance,
    two_period_arbitrage,
)


class TestLinearPath:
    def test_two_period_arbitrage_exact(self):
        report = solve(two_period_arbitrage())
        assert report.termination == "converged"
        assert report.objective == pytest.approx(-100.0, abs=1e-9)
        np.testing.assert_allclose(report.schedule.p_charge, [1.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(report.schedule.p_discharge, [0.0, 1.0], atol=1e-9)

    def test_reported_residuals_are_tiny(self):
        report = solve(two_period_arbitrage())
        assert report.feasibility_residual <= 1e-10
        assert report.optimality_residual <= 1e-8
        assert report.simultaneity_flags == ()
        assert report.terminal_gap <= 1e-10

    def test_deterministic_across_repeat_calls(self):
        inst = random_instance(seed=21)
        a = solve(inst)
        b = solve(inst)
        np.testing.assert_array_equal(a.schedule.p_charge, b.schedule.p_charge)
        np.testing.assert_array_equal(a.schedule.p_discharge, b.schedule.p_discharge)
        assert a.objective == b.objective

    def test_grid_limit_is_respected(self):
        inst = build_problem(
            make_day([50.0, 400.0, 50.0, 400.0], [1.5, 1.5, 1.5, 1.5]),
            BatteryParams(soc_initial=0.5, soc_target=0.5),
            grid_limit_mw=2.0,
        )
        report = solve(inst)
        assert report.termination == "converged"
        net = (report.schedule.p_charge - report.schedule.p_discharge
               + inst.day.load.values)
        assert np.all(np.abs(net) <= 2.0 + 1e-8)


class TestConvexPath:
    def test_penalty_below_break_even_keeps_the_swing(self):
        inst = two_period_arbitrage(wear_price=0.5 * TWO_PERIOD_BREAK_EVEN_WEIGHT)
        report = solve(inst)
        assert report.termination == "converged"
        assert report.objective == pytest.approx(-50.0, abs=1e-6)
        np.testing.assert_allclose(report.schedule.p_charge, [1.0, 0.0], atol=1e-6)

    def test_penalty_far_above_break_even_forces_idle(self):
        inst = two_period_arbitrage(wear_price=50.0 * TWO_PERIOD_BREAK_EVEN_WEIGHT)
        report = solve(inst)
        assert report.termination == "converged"
        assert report.objective == pytest.approx(0.0, abs=1e-6)
        assert np.max(report.schedule.p_charge) <= 1e-4

    def test_objective_never_above_zero_penalty_plus_wear_value(self):
        # the penalized optimum cannot beat the unpenalized optimum
        for seed in range(5):
            base = solve(random_instance(seed=seed, wear_price=0.0))
            pen = solve(random_instance(seed=seed, wear_price=1.0))
            assert pen.objective >= base.objective - 1e-6

    def test_full_day_size_is_feasible_and_converged(self):
        inst = random_instance(seed=42, steps=48, wear_price=0.5)
        report = solve(inst)
        assert report.termination == "converged"
        assert validate_feasibility(report.schedule, inst.bat, inst.day.grid,
                                    tol=1e-6) == []

    def test_smoothed_problem_solves(self):
        inst = build_problem(
            random_instance(seed=3, wear_price=1.0).day,
            random_instance(seed=3, wear_price=1.0).bat,
            smoothing_eps=1e-3,
        )
        report = solve(inst)
        assert report.termination == "converged"


class TestReachability:
    def test_unreachable_target_is_reported(self):
        bat = BatteryParams(capacity_mwh=10.0, soc_initial=0.0, soc_target=0.9)
        inst = build_problem(make_day([100.0], [0.0]), bat)
        ok, msg = check_reachability(inst)
        assert not ok
        assert "unreachable" in msg
        report = solve(inst)
        assert report.termination == "infeasible"
        assert "unreachable" in report.message

    def test_soft_terminal_recovers_a_schedule(self):
        bat = BatteryParams(capacity_mwh=10.0, soc_initial=0.0, soc_target=0.9)
        inst = build_problem(make_day([100.0], [0.0]), bat)
        report = solve(inst, SolveOptions(terminal_soft_weight=1e6))
        assert report.termination == "converged"
        assert report.relaxed_terminal
        assert report.terminal_gap > 0.0
        # the soft problem still charges as hard as it can toward the target
        assert report.schedule.p_charge[0] == pytest.approx(1.0, abs=1e-8)

    def test_reachable_boundary_case(self):
        bat = BatteryParams(capacity_mwh=1.0, eta_charge=1.0, eta_discharge=1.0,
                            soc_initial=0.0, soc_target=0.5)
        inst = build_problem(make_day([100.0], [0.0]), bat)
        assert check_reachability(inst) == (True, "")


class TestOracle:
    def test_matches_linear_solve_on_aligned_instance(self):
        inst = aligned_instance(seed=0)
        exact = solve(inst)
        brute = oracle_solve(inst, levels=11)
        bound = grid_gap_bound(inst, levels=11)
        assert exact.objective <= brute.objective + 1e-9
        assert brute.objective <= exact.objective + bound

    def test_matches_penalized_solve_on_aligned_instance(self):
        inst = aligned_instance(seed=4, wear_price=2.0)
        exact = solve(inst)
        brute = oracle_solve(inst, levels=11)
        bound = grid_gap_bound(inst, levels=11)
        assert exact.objective <= brute.objective + 1e-9
        assert brute.objective <= exact.objective + bound

    def test_two_period_oracle_recovers_bang_bang(self):
        brute = oracle_solve(two_period_arbitrage(), levels=3)
        assert brute.objective == pytest.approx(-100.0)
        x = schedule_to_vector(brute.schedule)
        np.testing.assert_array_equal(x, [1.0, 0.0, 0.0, 1.0])

    def test_budget_guard(self):
        with pytest.raises(InputError):
            oracle_solve(random_instance(seed=0, steps=48), levels=11)

    def test_level_guard(self):
        with pytest.raises(InputError):
            oracle_solve(aligned_instance(seed=0), levels=1)

    def test_gap_bound_shrinks_with_finer_grid(self):
        inst = aligned_instance(seed=1)
        assert grid_gap_bound(inst, levels=21) < grid_gap_bound(inst, levels=11)


class TestSolveOptions:
    def test_rejects_nonpositive_tolerances(self):
        with pytest.raises(InputError):
            SolveOptions(tol_feasibility=0.0)
        with pytest.raises(InputError):
            SolveOptions(tol_optimality=-1e-6)
