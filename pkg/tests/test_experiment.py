import csv
import json

import numpy as np
import pytest

import supplyshock.dynamics as dyn
from supplyshock.calibration import from_calibrated
from supplyshock.dynamics import SimParams, SimulationError
from supplyshock.experiment import (
    BatchError,
    compare_pair,
    derive_seed,
    loss_matrix,
    nationwide_report,
    pair_report,
    run_batch,
    run_single,
    value_added,
    write_gdp_timeseries,
    write_json,
    write_loss_matrix,
    write_pair_report,
)
from supplyshock.network import SupplyNetwork
from supplyshock.scenarios import ScenarioSpec, pair_region_set, single_region_set
from supplyshock.shock import LockdownSchedule, RestrictionWindow
from supplyshock.synthetic import synthetic_economy

SPEC = ScenarioSpec(durations=[2], coverage_levels=["L4"], recovery_days=30)


@pytest.fixture(scope="module")
def islands():
    """Three regions with no links between them."""
    return synthetic_economy(2000, link_count=5000, region_count=3, seed=5, intra_region_share=1.0)


def test_value_added_definition():
    net = SupplyNetwork(sector=[1, 1, 1], region=[1, 1, 1], sales=[1.0] * 3, supplier=[0, 1], client=[1, 2],
                        volume=[6.0, 10.0], final_consumption=[0.0, 0.0, 10.0])
    cal = from_calibrated(net)
    assert cal.p_ini.tolist() == [6.0, 10.0, 10.0]
    assert value_added(cal, 1) == 4.0
    assert value_added(cal, 2) == 0.0  # inputs equal output
    assert value_added(cal).tolist() == [6.0, 4.0, 0.0]


def test_zero_shock_loss_is_exactly_zero(small_economy, table):
    s = run_single(small_economy, "calm", LockdownSchedule((), 60), table, SimParams())
    assert s.total_loss == 0.0
    assert np.all(s.grp_loss == 0.0)
    assert s.gross_output_loss == 0.0


def test_shocked_gdp_never_exceeds_baseline(small_economy, table):
    sched = LockdownSchedule((RestrictionWindow(1, 0, 14), RestrictionWindow(2, 5, 14)), 60)
    s = run_single(small_economy, "x", sched, table, SimParams())
    assert np.all(s.gdp <= s.baseline_gdp + 1e-9)
    assert s.total_loss == pytest.approx(np.sum(s.baseline_gdp - s.gdp))
    assert s.total_loss == pytest.approx(s.grp_loss.sum(), rel=1e-9)
    assert s.total_loss > 0


def test_seed_derivation_is_stable():
    assert derive_seed(0, "a", 1) == derive_seed(0, "a", 1)
    assert len({derive_seed(0, "a", 1), derive_seed(1, "a", 1), derive_seed(0, "b", 1), derive_seed(0, "a", 2)}) == 4


def test_batch_counts_order_and_workers(small_economy, table):
    sets = single_region_set([1, 2], SPEC)
    one = run_batch(small_economy, sets, table, mc_runs=3, seed=4)
    assert [(s.label, s.run) for s in one] == [(lab, r) for lab, _ in sets for r in range(3)]
    two = run_batch(small_economy, sets, table, mc_runs=3, seed=4, workers=2)
    for a, b in zip(one, two):
        assert a.seed == b.seed
        assert a.gdp.tobytes() == b.gdp.tobytes()
    assert run_batch(small_economy, [], table) == []
    with pytest.raises(ValueError):
        run_batch(small_economy, sets, table, mc_runs=0)


def test_batch_errors_carry_label(small_economy, table, monkeypatch):
    def boom(*a, **k):
        raise SimulationError("day 0: invalid production for firm 3 (production phase)")

    monkeypatch.setattr(dyn, "_advance", boom)
    with pytest.raises(BatchError, match="single/r1/L4/w2 run 0.*firm 3"):
        run_batch(small_economy, single_region_set([1], SPEC), table, mc_runs=1)


def test_loss_matrix_structure(islands, table):
    regions = [1, 2, 3]
    res = run_batch(islands, single_region_set(regions, SPEC), table, mc_runs=2)
    m = loss_matrix(res, regions)
    assert m.shape == (3, 3)
    assert np.all(np.diag(m) > 0)
    off = m[~np.eye(3, dtype=bool)]
    assert np.all(off == 0.0)
    with pytest.raises(BatchError, match="region 4"):
        loss_matrix(res, [1, 2, 4])


def test_pair_report_on_islands(islands, table):
    spec = ScenarioSpec(durations=[2], recovery_days=30)
    pairs = pair_region_set([1, 2, 3], spec)
    schedules = {}
    for p in pairs:
        schedules[p.label] = p.concurrent
        schedules.update(p.async_parts)
    res = run_batch(islands, list(schedules.items()), table, mc_runs=8, seed=1)
    rep = pair_report(pairs, res)
    assert [c.pair for c in rep] == ["pair/r1-r2/w2", "pair/r1-r3/w2", "pair/r2-r3/w2"]
    for c in rep:
        # no cross-region channel: the two set-ups differ only by inventory draws
        assert c.async_mean == pytest.approx(c.concurrent_mean, rel=0.05)
        assert 0.0 <= c.p_value <= 1.0


def test_pair_report_mismatched_runs():
    with pytest.raises(BatchError, match="mismatched"):
        compare_pair("p", (1, 2), [1, 2, 3], [1, 2, 3], [1, 2])


def test_nationwide_report():
    c = nationwide_report([type("S", (), {"total_loss": x})() for x in (1, 2, 3)],
                          [type("S", (), {"total_loss": x})() for x in (10, 11, 12)])
    assert (c.concurrent_mean, c.async_mean, c.p_value) == (2.0, 11.0, pytest.approx(0.1))


def test_writers(tmp_path, small_economy, table):
    res = run_batch(small_economy, single_region_set([1, 2], SPEC), table, mc_runs=1)
    write_loss_matrix(tmp_path / "m.csv", loss_matrix(res, [1, 2]), [1, 2])
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["restricted", "1", "2"] and rows[1][0] == "1"
    write_gdp_timeseries(tmp_path / "g.csv", res)
    rows = list(csv.reader(open(tmp_path / "g.csv")))
    assert rows[0] == ["schedule", "run", "day", "gdp"]
    assert len(rows) == 1 + 2 * res[0].horizon
    assert all(len(r[3].replace(".", "").replace("-", "").lstrip("0").split("e")[0]) <= 9 for r in rows[1:])
    comp = compare_pair("pair/r1-r2/w2", (1, 2), [1.0, 2.0, 3.0], [1.5, 2.5, 3.5], [0.1, 0.2, 0.3])
    write_pair_report(tmp_path / "p.csv", [comp])
    assert open(tmp_path / "p.csv").read().splitlines()[0] == "pair,concurrent_mean,async_mean,p_value"
    write_json(tmp_path / "s.json", {"x": 1 / 3, "y": [np.float64(2 / 3)], "z": np.int64(4)})
    assert json.load(open(tmp_path / "s.json")) == {"x": 0.333333333, "y": [0.666666667], "z": 4}
