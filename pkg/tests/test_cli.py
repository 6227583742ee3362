import json

import pytest

from supplyshock import __version__
from supplyshock.cli import main
from supplyshock.network import load_network

SCHEDULE = {"horizon_days": 20, "windows": [{"region": 1, "start_day": 0, "duration_days": 7, "coverage": "L4"}]}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["generate", "--out", str(d / "net"), "--firms", "800", "--regions", "3", "--seed", "2"]) == 0
    assert main(["calibrate", "--net", str(d / "net"), "--io", str(d / "net" / "io_table.csv"),
                 "--out", str(d / "cal")]) == 0
    (d / "s.json").write_text(json.dumps(SCHEDULE), encoding="utf-8")
    return d


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_missing_net_is_usage_error(capsys):
    assert main(["simulate", "--schedule", "s.json", "--out", "x"]) == 1
    err = capsys.readouterr().err
    assert "usage:" in err and "--net" in err


def test_unknown_flag(capsys):
    assert main(["diagnose", "--net", "x", "--out", "y", "--bogus"]) == 1


def test_generate_and_calibrate(workdir):
    net = load_network(workdir / "cal")
    assert net.firm_count == 800 and net.volume.any()
    summary = json.loads((workdir / "cal" / "summary.json").read_text())
    assert summary["command"] == "calibrate"


def test_simulate_deterministic(workdir):
    args = ["simulate", "--net", str(workdir / "cal" / "firms.csv"), "--schedule", str(workdir / "s.json"),
            "--seed", "7", "--mc", "2"]
    assert main(args + ["--out", str(workdir / "a")]) == 0
    assert main(args + ["--out", str(workdir / "b"), "--workers", "2"]) == 0
    assert files(workdir / "a") == files(workdir / "b")
    assert main(args + ["--out", str(workdir / "c"), "--seed", "8"]) == 0
    # inventories may never bind in so short a window, so compare the drawn seeds
    assert files(workdir / "a")["losses.csv"] != files(workdir / "c")["losses.csv"]


def test_simulate_diagnostics_stream(workdir):
    out = workdir / "diag"
    assert main(["simulate", "--net", str(workdir / "cal"), "--schedule", str(workdir / "s.json"),
                 "--diagnostics", "--out", str(out)]) == 0
    lines = (out / "diagnostics.csv").read_text().splitlines()
    assert lines[0] == "day,firm,p_act,p_cap,p_max,demand"
    assert len(lines) == 1 + 20 * 800


def test_config_precedence(workdir):
    cfg = workdir / "cfg.json"
    cfg.write_text(json.dumps({"seed": 5, "mc_runs": 3, "tau": 4}), encoding="utf-8")
    out = workdir / "cfg_out"
    assert main(["simulate", "--net", str(workdir / "cal"), "--schedule", str(workdir / "s.json"),
                 "--config", str(cfg), "--tau", "8", "--out", str(out)]) == 0
    echo = json.loads((out / "summary.json").read_text())["config"]
    assert (echo["seed"], echo["mc"], echo["tau"]) == (5, 3, 8.0)
    assert "workers" not in echo


def test_workers_env(workdir, monkeypatch):
    monkeypatch.setenv("SUPPLYSHOCK_WORKERS", "0")
    assert main(["simulate", "--net", str(workdir / "cal"), "--schedule", str(workdir / "s.json"),
                 "--out", str(workdir / "w")]) == 1


def test_data_errors_exit_2(workdir, tmp_path):
    assert main(["simulate", "--net", str(workdir / "net"), "--schedule", str(workdir / "s.json"),
                 "--out", str(tmp_path / "o")]) == 2  # uncalibrated
    assert main(["simulate", "--net", str(workdir / "cal"), "--schedule", str(tmp_path / "none.json"),
                 "--out", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"horizon_days": 3, "windows": [{"region": 1, "start_day": 0, "duration_days": 9}]}')
    assert main(["simulate", "--net", str(workdir / "cal"), "--schedule", str(bad),
                 "--out", str(tmp_path / "o")]) == 2
    assert main(["scenario", "pair", "--net", str(workdir / "cal"), "--regions", "9",
                 "--out", str(tmp_path / "o")]) == 2


def test_diagnose(workdir):
    out = workdir / "dg"
    assert main(["diagnose", "--net", str(workdir / "cal"), "--path-samples", "50", "--out", str(out)]) == 0
    d = json.loads((out / "summary.json").read_text())
    assert 0 <= d["gscc_share"] <= 1 and d["avg_path_length"] >= 1


def test_scenario_pair_and_report(workdir):
    out = workdir / "pairs"
    assert main(["scenario", "pair", "--net", str(workdir / "cal"), "--regions", "3", "--weeks", "1",
                 "--mc", "3", "--recovery-days", "10", "--out", str(out)]) == 0
    rows = (out / "pair_report.csv").read_text().splitlines()
    assert rows[0] == "pair,concurrent_mean,async_mean,p_value" and len(rows) == 1 + 3
    rebuilt = workdir / "rebuilt"
    assert main(["report", "--in", str(out), "--out", str(rebuilt)]) == 0
    assert (rebuilt / "pair_report.csv").read_bytes() == (out / "pair_report.csv").read_bytes()


def test_scenario_single_and_nationwide(workdir):
    out = workdir / "single"
    assert main(["scenario", "single", "--net", str(workdir / "cal"), "--regions", "1,3", "--weeks", "1",
                 "--coverage", "L1,L4", "--mc", "2", "--recovery-days", "5", "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"loss_matrix.csv", "loss_matrix_L1_w1.csv", "loss_matrix_L4_w1.csv", "summary.json"} <= names
    assert (out / "loss_matrix.csv").read_text().splitlines()[0] == "restricted,1,3"
    nat = workdir / "nat"
    assert main(["scenario", "nationwide", "--net", str(workdir / "cal"), "--mc", "3", "--samples", "4",
                 "--recovery-days", "5", "--out", str(nat)]) == 0
    summary = json.loads((nat / "summary.json").read_text())
    assert summary["spec"]["durations"] == [4]
    assert 0 <= summary["nationwide"]["p_value"] <= 1
