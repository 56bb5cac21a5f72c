import numpy as np
import pytest

from fcsdispatch.domain import (
    BatteryParams,
    DispatchSchedule,
    InputError,
    LoadProfile,
    TimeGrid,
    grid_exchange,
    soc_trajectory,
    validate_feasibility,
)


def sched(p_ch, p_dis):
    return DispatchSchedule(p_charge=p_ch, p_discharge=p_dis)


class TestSocTrajectory:
    def test_lossless_round_trip(self):
        bat = BatteryParams(capacity_mwh=1.0, eta_charge=1.0, eta_discharge=1.0,
                            soc_initial=0.0, soc_target=0.0)
        traj = soc_trajectory(sched([1.0, 0.0], [0.0, 1.0]), bat, TimeGrid(2, 0.5))
        assert traj.soc.tolist() == [0.0, 0.5, 0.0]

    def test_idle_battery_stays_put(self):
        bat = BatteryParams(soc_initial=0.37)
        traj = soc_trajectory(sched([0.0] * 5, [0.0] * 5), bat, TimeGrid(5, 0.5))
        assert np.all(traj.soc == 0.37)

    def test_lossy_recursion_matches_direct_evaluation(self):
        # oracle: explicit step-by-step recursion, written independently
        bat = BatteryParams(capacity_mwh=1.0, eta_charge=0.95, eta_discharge=0.95,
                            soc_initial=0.5)
        p_ch, p_dis = [1.0, 0.0], [0.0, 1.0]
        expected = [0.5]
        for t in range(2):
            expected.append(expected[-1] + 0.5 / 1.0 * (0.95 * p_ch[t] - p_dis[t] / 0.95))
        traj = soc_trajectory(sched(p_ch, p_dis), bat, TimeGrid(2, 0.5))
        np.testing.assert_allclose(traj.soc, expected, rtol=0, atol=1e-15)

    def test_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            soc_trajectory(sched([1.0], [0.0]), BatteryParams(), TimeGrid(2, 0.5))

    def test_linearity_in_schedule(self):
        rng = np.random.default_rng(7)
        bat = BatteryParams()
        grid = TimeGrid(12, 0.5)
        a = sched(rng.uniform(0, 1, 12), rng.uniform(0, 1, 12))
        b = sched(rng.uniform(0, 1, 12), rng.uniform(0, 1, 12))
        lam = 0.3
        mixed = sched(lam * a.p_charge + (1 - lam) * b.p_charge,
                      lam * a.p_discharge + (1 - lam) * b.p_discharge)
        lhs = soc_trajectory(mixed, bat, grid).soc
        rhs = (lam * soc_trajectory(a, bat, grid).soc
               + (1 - lam) * soc_trajectory(b, bat, grid).soc)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-14)


class TestGridExchange:
    def test_partial_peak_shaving(self):
        ex = grid_exchange(sched([0.0], [0.3]), LoadProfile([0.5]))
        assert ex.p_in.tolist() == [pytest.approx(0.2)]
        assert ex.p_out.tolist() == [0.0]

    def test_net_export(self):
        ex = grid_exchange(sched([0.0], [0.8]), LoadProfile([0.5]))
        assert ex.p_in.tolist() == [0.0]
        assert ex.p_out.tolist() == [pytest.approx(0.3)]

    def test_reconstructs_net_balance_exactly(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p_ch = rng.uniform(0, 1, 16)
            p_dis = rng.uniform(0, 1, 16)
            load = rng.uniform(0, 2, 16)
            ex = grid_exchange(sched(p_ch, p_dis), LoadProfile(load))
            np.testing.assert_array_equal(ex.p_in - ex.p_out, p_ch - p_dis + load)
            assert np.all(np.minimum(ex.p_in, ex.p_out) == 0.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(InputError):
            grid_exchange(sched([0.0], [0.0]), LoadProfile([0.5, 0.5]))


class TestValidateFeasibility:
    def test_idle_schedule_is_feasible(self):
        bat = BatteryParams(soc_initial=0.5, soc_target=0.5)
        assert validate_feasibility(sched([0.0] * 4, [0.0] * 4), bat, TimeGrid(4, 0.5)) == []

    def test_power_bound_breach_is_named_with_magnitude(self):
        bat = BatteryParams(capacity_mwh=10.0, power_limit_mw=1.0,
                            soc_initial=0.5, soc_target=0.5)
        violations = validate_feasibility(sched([2.0], [0.0]), bat, TimeGrid(1, 0.5), tol=1e-3)
        names = {v.constraint for v in violations}
        assert "charge_power_upper" in names
        breach = next(v for v in violations if v.constraint == "charge_power_upper")
        assert breach.step == 0
        assert breach.magnitude == pytest.approx(1.0)

    def test_terminal_gap_reported(self):
        bat = BatteryParams(capacity_mwh=1.0, soc_initial=0.5, soc_target=0.9)
        violations = validate_feasibility(sched([0.0], [0.0]), bat, TimeGrid(1, 0.5))
        assert [v.constraint for v in violations] == ["terminal_soc"]
        assert violations[0].magnitude == pytest.approx(0.4)

    def test_monotone_in_tolerance(self):
        rng = np.random.default_rng(11)
        bat = BatteryParams(soc_initial=0.5, soc_target=0.5)
        grid = TimeGrid(8, 0.5)
        for _ in range(10):
            s = sched(rng.uniform(0, 1, 8), rng.uniform(0, 1, 8))
            if not validate_feasibility(s, bat, grid, tol=0.0):
                assert not validate_feasibility(s, bat, grid, tol=0.1)


class TestBatteryParams:
    def test_rejects_bad_efficiency(self):
        with pytest.raises(InputError):
            BatteryParams(eta_charge=1.2)

    def test_rejects_negative_wear_price(self):
        with pytest.raises(InputError):
            BatteryParams(wear_price_dkk_per_kwh=-1.0)

    def test_warns_on_unusual_exponent(self):
        with pytest.warns(UserWarning):
            BatteryParams(peukert_exponent=1.5)

    def test_rejects_exponent_below_one(self):
        with pytest.raises(InputError):
            BatteryParams(peukert_exponent=0.9)

    def test_arrays_are_read_only(self):
        s = sched([0.5], [0.0])
        with pytest.raises(ValueError):
            s.p_charge[0] = 1.0
