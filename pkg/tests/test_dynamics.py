import numpy as np
import pytest

from supplyshock.calibration import from_calibrated
from supplyshock.dynamics import (
    SimParams,
    SimulationError,
    draw_inventory_days,
    init_state,
    iter_days,
    simulate,
    step_day,
)
from supplyshock.network import SupplyNetwork
from supplyshock.shock import LockdownSchedule, Rationale, RestrictionWindow, SectorEntry, SectorTable

NO_SHOCK = LockdownSchedule((), 120)


def lone_firm_table():
    # adjusted 0.2 = 0.5 x (0.5 x (1 - 0.2))
    e = SectorEntry(9, "X", 0.2, 0.4, 0.2, 0.5, Rationale.ORDINARY)
    return SectorTable({9: e}, weight=0.5)


def test_init_state_definitions(small_economy):
    net = SupplyNetwork(sector=[1, 1], region=[1, 1], sales=[1.0, 1.0], supplier=[0], client=[1],
                        volume=[2.0], final_consumption=[0.0, 1.0])
    st = init_state(from_calibrated(net), inventory_days=[7, 5])
    assert st.inventory.tolist() == [10.0]
    a = init_state(small_economy, SimParams(seed=3))
    b = init_state(small_economy, SimParams(seed=3))
    np.testing.assert_array_equal(a.inventory_days, b.inventory_days)
    np.testing.assert_array_equal(a.realized_demand_prev, small_economy.p_ini)


def test_inventory_days_clamped_below():
    days = draw_inventory_days(50_000, SimParams(mean_inventory_days=3.0))
    assert days.min() == 4
    assert np.mean(days == 4) > 0.5  # P(Poisson(3) <= 4) ~ 0.82


def test_zero_shock_is_a_fixed_point(small_economy, table):
    res = simulate(small_economy, NO_SHOCK, table, SimParams(seed=1))
    dev = np.abs(res.p_act - small_economy.p_ini) / np.where(small_economy.p_ini > 0, small_economy.p_ini, 1)
    assert dev.max() <= 1e-9
    assert res.final_state.clamp_events == 0
    np.testing.assert_allclose(res.final_state.inventory, init_state(small_economy, SimParams(seed=1)).inventory,
                               rtol=1e-9)


def test_lone_firm_capacity():
    net = SupplyNetwork(sector=[9], region=[1], sales=[1.0], supplier=[], client=[],
                        final_consumption=[5.0])
    cal = from_calibrated(net)
    sched = LockdownSchedule((RestrictionWindow(1, 0, 1),), 1)
    _, rec = step_day(init_state(cal), cal, sched, lone_firm_table())
    assert rec.p_act.tolist() == [pytest.approx(4.0)]


def test_two_firm_chain_first_day(table):
    # supplier in accommodation (75, adjusted 0.287) restricted; client elsewhere
    net = SupplyNetwork(sector=[75, 1], region=[1, 2], sales=[1.0, 1.0], supplier=[0], client=[1],
                        volume=[3.0], final_consumption=[0.0, 5.0])
    cal = from_calibrated(net)
    sched = LockdownSchedule((RestrictionWindow(1, 0, 3),), 3)
    st, rec = step_day(init_state(cal, SimParams(seed=0)), cal, sched, table)
    assert rec.p_act[0] == pytest.approx(0.713 * 3.0)
    assert rec.p_act[1] == pytest.approx(cal.p_ini[1])


def test_step_day_matches_iter_days(small_economy, table):
    sched = LockdownSchedule((RestrictionWindow(1, 2, 10),), 25)
    p = SimParams(seed=4)
    streamed = [r.p_act for r in iter_days(small_economy, sched, table, p)]
    st = init_state(small_economy, p)
    for day in range(25):
        st, rec = step_day(st, small_economy, sched, table, params=p)
        np.testing.assert_array_equal(rec.p_act, streamed[day])


def test_step_day_leaves_input_untouched(small_economy, table):
    st = init_state(small_economy)
    before = st.inventory.copy()
    step_day(st, small_economy, LockdownSchedule((RestrictionWindow(1, 0, 5),), 5), table)
    np.testing.assert_array_equal(st.inventory, before)
    assert st.day == 0


@pytest.mark.parametrize("literal,lagged", [(False, False), (True, False), (False, True)])
def test_shocked_run_invariants(small_economy, table, literal, lagged):
    sched = LockdownSchedule((RestrictionWindow(1, 0, 21), RestrictionWindow(2, 7, 14, "L3")), 60)
    p = SimParams(seed=5, ration_literal=literal, lagged_consumption=lagged, diagnostics=True)
    st = init_state(small_economy, p)
    from supplyshock.shock import CompiledSchedule
    comp = CompiledSchedule(small_economy.net, sched, table)
    for rec in iter_days(small_economy, comp, table, p, st):
        cap = small_economy.p_ini * (1 - comp.at(rec.day))
        assert np.all(rec.p_act >= 0)
        assert np.all(rec.p_act <= cap + 1e-9)
        assert np.all(rec.p_act <= rec.demand * (1 + 1e-12))
        if not literal:
            # every unit produced is delivered: realized demand equals output
            np.testing.assert_allclose(st.realized_demand_prev, rec.p_act, rtol=1e-9, atol=1e-9)
    assert np.all(st.inventory >= 0)


def test_restriction_lowers_output_and_recovers(small_economy, table):
    sched = LockdownSchedule((RestrictionWindow(1, 0, 14),), 80)
    res = simulate(small_economy, sched, table, SimParams(seed=2))
    total = res.p_act.sum(axis=1) / small_economy.p_ini.sum()
    assert total[:14].max() < 1.0
    assert abs(total[-1] - 1.0) < 0.01


def test_deterministic_streams(small_economy, table):
    sched = LockdownSchedule((RestrictionWindow(3, 0, 7),), 30)
    a = simulate(small_economy, sched, table, SimParams(seed=8)).p_act
    b = simulate(small_economy, sched, table, SimParams(seed=8)).p_act
    assert a.tobytes() == b.tobytes()


def test_invalid_state_aborts_with_firm_and_phase(small_economy, table):
    st = init_state(small_economy)
    st.inventory[:] = np.nan
    with pytest.raises(SimulationError, match="firm .* phase"):
        step_day(st, small_economy, NO_SHOCK, table)


def test_day_outside_horizon(small_economy, table):
    with pytest.raises(SimulationError):
        step_day(init_state(small_economy), small_economy, LockdownSchedule((), 3), table, day=3)


def test_params_validation():
    with pytest.raises(ValueError):
        SimParams(tau=0.5)
    with pytest.raises(ValueError):
        SimParams(min_inventory_days=0)
