"""
Command-line entry point.

    supplyshock generate  --out net/ --firms 10000 --regions 10
    supplyshock calibrate --net net/ --io net/io_table.csv --out cal/
    supplyshock diagnose  --net cal/ --out diag.json
    supplyshock simulate  --net cal/ --schedule s.json --out run/
    supplyshock scenario  pair --net cal/ --regions 10 --weeks 4 --mc 30 --out pairs/
    supplyshock report    --in pairs/ --out pairs/

Options left unset fall back to a ``--config`` JSON file, then to built-in
defaults. The resolved values are echoed into ``summary.json``.
Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import re
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .calibration import CalibrationError, calibrate, from_calibrated, load_io_table, random_io_table, save_io_table
from .dynamics import SimParams, SimulationError
from .experiment import (
    BatchError,
    compare_pair,
    fmt,
    loss_matrix,
    nationwide_report,
    run_batch,
    run_single,
    write_gdp_timeseries,
    write_json,
    write_loss_matrix,
    write_losses,
    write_pair_report,
)
from .network import NetworkError, SyntheticConfig, diagnostics, generate_synthetic, load_edge_list, load_network, save_network
from .scenarios import ScenarioSpec, nationwide_set, pair_region_set, single_region_set
from .shock import CoverageLevel, ShockError, bundled_sector_table, load_coverage_overrides, load_schedule, load_sector_table
from .synthetic import region_weights

log = logging.getLogger("supplyshock")

WORKERS_ENV = "SUPPLYSHOCK_WORKERS"

DEFAULTS = {
    "seed": 0,
    "firms": 10_000,
    "links": None,
    "regions": None,
    "exponent": 2.4,
    "intra_share": 0.3,
    "mc": 30,
    "weeks": [1, 2, 3, 4],
    "coverage": [c.value for c in CoverageLevel],
    "recovery_days": 60,
    "gap_days": 0,
    "window_months": 3,
    "samples": None,
    "path_samples": 1000,
    "tau": 6.0,
    "mean_inventory_days": 10.0,
    "ration_literal": False,
    "lagged_consumption": False,
    "diagnostics": False,
}

# scenario-spec spellings accepted in config files
ALIASES = {
    "mc_runs": "mc",
    "durations": "weeks",
    "coverage_levels": "coverage",
    "asynchronous_gap_days": "gap_days",
}

DATA_ERRORS = (NetworkError, CalibrationError, ShockError, SimulationError, BatchError,
               ValueError, KeyError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_info() -> str:
    return (f"supplyshock {__version__} (python {platform.python_version()}, "
            f"numpy {np.__version__}, scipy {scipy.__version__})")


def _common(p, *, net=True, out=True):
    if net:
        p.add_argument("--net", required=True, help="network directory, or firms CSV with links.csv beside it")
    if out:
        p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")


def _sim_flags(p):
    p.add_argument("--sectors", help="sector table CSV (default: bundled)")
    p.add_argument("--coverage-file", help="coverage level overrides CSV")
    p.add_argument("--io", help="IO table; calibrates the network before simulating")
    p.add_argument("--tau", type=float)
    p.add_argument("--mean-inventory-days", type=float)
    p.add_argument("--ration-literal", action="store_true", default=None)
    p.add_argument("--lagged-consumption", action="store_true", default=None)


def _int_list(text):
    return [int(x) for x in re.split(r"[,\s]+", text.strip()) if x]


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="supplyshock", description="Supply-chain shock propagation under regional restrictions.")
    ap.add_argument("--version", action="version", version=build_info())
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="synthetic scale-free network plus a random IO table")
    _common(p, net=False)
    p.add_argument("--firms", type=int)
    p.add_argument("--links", type=int, help="default: 4 per firm")
    p.add_argument("--regions", type=int, help="region count (default 10)")
    p.add_argument("--exponent", type=float)
    p.add_argument("--intra-share", type=float)
    p.add_argument("--sectors")

    p = sub.add_parser("calibrate", help="estimate daily volumes from sales and an IO table")
    _common(p)
    p.add_argument("--io", required=True)

    p = sub.add_parser("diagnose", help="GSCC share, path length and degree tail")
    _common(p)
    p.add_argument("--path-samples", type=int)

    p = sub.add_parser("simulate", help="run one schedule")
    _common(p)
    _sim_flags(p)
    p.add_argument("--schedule", required=True)
    p.add_argument("--mc", type=int, help="Monte Carlo runs (default 1)")
    p.add_argument("--diagnostics", action="store_true", default=None,
                   help="write per-firm daily production of run 0")

    p = sub.add_parser("scenario", help="run a scenario family")
    fam = p.add_subparsers(dest="family", required=True, parser_class=_Parser)
    for name in ("single", "pair", "nationwide"):
        q = fam.add_parser(name)
        _common(q)
        _sim_flags(q)
        q.add_argument("--regions", help="region count N (the N smallest ids) or a comma list of ids")
        q.add_argument("--weeks", type=_int_list, help="restriction lengths, e.g. 1,2,4")
        q.add_argument("--mc", type=int)
        q.add_argument("--recovery-days", type=int)
        if name == "single":
            q.add_argument("--coverage", type=lambda s: [c.strip() for c in s.split(",")])
        if name == "pair":
            q.add_argument("--gap-days", type=int, help="also run both windows staggered by this gap")
        if name == "nationwide":
            q.add_argument("--window-months", type=int)
            q.add_argument("--samples", type=int, help="asynchronous samples (default: --mc)")

    p = sub.add_parser("report", help="rebuild report tables from losses.csv")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    return ap


# ---------------------------------------------------------------------------
# Option resolution
# ---------------------------------------------------------------------------


def resolve(args) -> dict:
    """Flag > config file > default, for every option this command declares."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ValueError(f"{args.config}: expected a JSON object")
        cfg = {ALIASES.get(k, k).replace("-", "_"): v for k, v in raw.items()}
    declared = vars(args)
    out = {}
    for key, val in declared.items():
        if key in ("command", "family", "config", "verbose"):
            continue
        if val is None:
            val = cfg.get(key, DEFAULTS.get(key))
        out[key] = val
    if out.get("workers") is None:
        out["workers"] = int(os.environ.get(WORKERS_ENV, "1"))
    if out["workers"] < 1:
        raise UsageError("--workers must be >= 1")
    return out


def _echo(opts: dict) -> dict:
    # neither the worker count nor the output location changes results
    return {k: v for k, v in sorted(opts.items()) if k not in ("workers", "out")}


def _versions() -> dict:
    return {"supplyshock": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _read_net(path):
    p = Path(path)
    if p.is_dir():
        return load_network(p)
    if not p.exists():
        raise FileNotFoundError(f"{p}: no such file or directory")
    fc = p.parent / "final_consumption.csv"
    return load_edge_list(p, p.parent / "links.csv", fc if fc.exists() else None)


def _load_inputs(opts):
    net = _read_net(opts["net"])
    if opts.get("io"):
        cal = calibrate(net, load_io_table(opts["io"]))
    else:
        if not (net.volume.any() or net.final_consumption.any()):
            raise CalibrationError(f"{opts['net']}: network has no volumes; run calibrate or pass --io")
        cal = from_calibrated(net)
    table = load_sector_table(opts["sectors"]) if opts.get("sectors") else bundled_sector_table()
    overrides = load_coverage_overrides(opts["coverage_file"]) if opts.get("coverage_file") else None
    return cal, table, overrides


def _params(opts) -> SimParams:
    return SimParams(
        tau=float(opts["tau"]),
        mean_inventory_days=float(opts["mean_inventory_days"]),
        ration_literal=bool(opts["ration_literal"]),
        lagged_consumption=bool(opts["lagged_consumption"]),
        seed=int(opts["seed"]),
    )


def _pick_regions(spec, available):
    available = sorted(int(r) for r in available)
    if spec is None:
        return available
    if isinstance(spec, int) or (isinstance(spec, str) and spec.strip().isdigit()):
        n = int(spec)
        if not 1 <= n <= len(available):
            raise ValueError(f"--regions {n}: network has {len(available)} regions")
        return available[:n]
    ids = _int_list(spec) if isinstance(spec, str) else [int(x) for x in spec]
    missing = sorted(set(ids) - set(available))
    if missing:
        raise ValueError(f"region(s) {missing} absent from the network")
    return ids


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(opts):
    table = load_sector_table(opts["sectors"]) if opts.get("sectors") else bundled_sector_table()
    codes = sorted(table.codes)
    firms = int(opts["firms"])
    links = int(opts["links"]) if opts["links"] is not None else 4 * firms
    region_count = int(opts["regions"]) if opts["regions"] is not None else 10
    seed = int(opts["seed"])
    net = generate_synthetic(SyntheticConfig(
        firm_count=firms, link_count=links, region_weights=region_weights(region_count),
        sector_weights={c: 1.0 for c in codes}, exponent=float(opts["exponent"]),
        intra_region_share=float(opts["intra_share"]), seed=seed,
    ))
    out = Path(opts["out"])
    save_network(net, out, calibrated=False)
    save_io_table(random_io_table(codes, seed=seed + 1), out / "io_table.csv")
    write_json(out / "summary.json", {"command": "generate", "config": _echo(opts), "versions": _versions(),
                                      "firms": net.firm_count, "links": net.link_count})


def cmd_calibrate(opts):
    cal = calibrate(_read_net(opts["net"]), load_io_table(opts["io"]))
    out = Path(opts["out"])
    save_network(cal.net, out, calibrated=True)
    r = cal.report
    write_json(out / "summary.json", {
        "command": "calibrate", "config": _echo(opts), "versions": _versions(),
        "dropped_pairs": [[int(a), int(b), v] for a, b, v in r.dropped_pairs],
        "dropped_transactions": r.dropped_transactions,
        "sectors_without_firms": [[int(c), v] for c, v in r.sectors_without_firms],
        "zero_sales_sectors": sorted(map(int, r.zero_sales_sectors)),
    })


def cmd_diagnose(opts):
    net = _read_net(opts["net"])
    d = diagnostics(net, path_sample_size=int(opts["path_samples"]), seed=int(opts["seed"]))
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "summary.json", {
        "command": "diagnose", "config": _echo(opts), "versions": _versions(),
        "firms": net.firm_count, "links": net.link_count,
        "gscc_share": d.gscc_share, "avg_path_length": d.avg_path_length,
        "degree_tail_exponent": d.degree_tail_exponent,
    })


def cmd_simulate(opts):
    cal, table, overrides = _load_inputs(opts)
    schedule = load_schedule(opts["schedule"])
    mc = 1 if opts["mc"] is None else int(opts["mc"])
    params = _params(opts)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    label = Path(opts["schedule"]).stem
    results = []
    if opts["diagnostics"]:
        diag_params = SimParams(**{**params.__dict__, "diagnostics": True})
        with (out / "diagnostics.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["day", "firm", "p_act", "p_cap", "p_max", "demand"])

            def dump(rec):
                for i in range(len(rec.p_act)):
                    w.writerow([rec.day, i, fmt(rec.p_act[i]), fmt(rec.p_cap[i]), fmt(rec.p_max[i]), fmt(rec.demand[i])])

            results.append(run_single(cal, label, schedule, table, diag_params, 0, params.seed, overrides, on_day=dump))
        if mc > 1:
            rest = run_batch(cal, [(label, schedule)], table, params, mc, params.seed, opts["workers"], overrides)
            results += rest[1:]
    else:
        results = run_batch(cal, [(label, schedule)], table, params, mc, params.seed, opts["workers"], overrides)
    write_gdp_timeseries(out / "gdp_timeseries.csv", results)
    write_losses(out / "losses.csv", results)
    write_json(out / "summary.json", {
        "command": "simulate", "config": _echo(opts), "versions": _versions(),
        "schedule": schedule.to_dict(),
        "baseline_gdp_per_day": results[0].baseline_gdp,
        "runs": [{"run": s.run, "seed": s.seed, "gdp_loss": s.total_loss,
                  "gross_output_loss": s.gross_output_loss, "inventory_clamps": s.clamp_events}
                 for s in results],
        "mean_gdp_loss": float(np.mean([s.total_loss for s in results])),
    })


def cmd_scenario(opts, family):
    cal, table, overrides = _load_inputs(opts)
    regions = _pick_regions(opts["regions"], cal.net.regions)
    weeks = opts["weeks"]
    if family == "nationwide" and weeks == DEFAULTS["weeks"]:
        weeks = [4]
    spec = ScenarioSpec(
        family={"single": "SingleRegion", "pair": "PairRegion", "nationwide": "Nationwide"}[family],
        durations=weeks,
        coverage_levels=opts.get("coverage") or DEFAULTS["coverage"],
        mc_runs=int(opts["mc"]),
        asynchronous_gap_days=int(opts.get("gap_days") or 0),
        window_months=int(opts.get("window_months") or DEFAULTS["window_months"]),
        recovery_days=int(opts["recovery_days"]),
        seed=int(opts["seed"]),
    )
    params = _params(opts)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    summary = {"command": f"scenario {family}", "config": _echo(opts), "versions": _versions(),
               "spec": spec.to_dict(), "regions": regions}

    def batch(schedules, mc=spec.mc_runs):
        return run_batch(cal, schedules, table, params, mc, spec.seed, opts["workers"], overrides)

    if family == "single":
        results = batch(single_region_set(regions, spec))
        summary["loss_matrices"] = _write_matrices(out, results, regions)
    elif family == "pair":
        pairs = pair_region_set(regions, spec)
        schedules = {}
        for p in pairs:
            schedules[p.label] = p.concurrent
            schedules.update(p.async_parts)
        if spec.asynchronous_gap_days > 0:
            schedules.update({p.label.replace("pair/", "staggered/"): p.staggered for p in pairs})
        results = batch(list(schedules.items()))
        summary.update(_write_pairs(out, results))
    else:
        if len(spec.durations) != 1:
            raise UsageError("nationwide takes a single --weeks value")
        samples = opts.get("samples")
        concurrent, asyn = nationwide_set(regions, spec, samples=samples, seed=spec.seed,
                                          weeks=spec.durations[0])
        results = batch([("nationwide/concurrent", concurrent)]) + batch(asyn, mc=1)
        summary.update(_write_nationwide(out, results))
    write_losses(out / "losses.csv", results)
    write_gdp_timeseries(out / "gdp_timeseries.csv", results)
    summary["total_gdp_loss"] = float(sum(s.total_loss for s in results))
    write_json(out / "summary.json", summary)


def _write_matrices(out: Path, results, regions) -> dict:
    groups: dict[tuple[str, int], list] = {}
    for s in results:
        m = re.fullmatch(r"single/r(-?\d+)/(L\d)/w(\d+)", s.label)
        if m:
            groups.setdefault((m.group(2), int(m.group(3))), []).append(s)
    if not groups:
        return {}
    names = {}
    for (level, weeks), rs in sorted(groups.items()):
        restricted = sorted({s.restricted[0] for s in rs})
        mat = loss_matrix(rs, restricted)
        name = f"loss_matrix_{level}_w{weeks}.csv"
        write_loss_matrix(out / name, mat, restricted)
        names[f"{level}/w{weeks}"] = name
    # the headline matrix: widest coverage, longest restriction
    level, weeks = max(groups, key=lambda k: (int(k[0][1:]), k[1]))
    rs = groups[(level, weeks)]
    restricted = sorted({s.restricted[0] for s in rs})
    write_loss_matrix(out / "loss_matrix.csv", loss_matrix(rs, restricted), restricted)
    return names


def _totals(results) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for s in results:
        out.setdefault(s.label, []).append(s.total_loss)
    return out


def _write_pairs(out: Path, results) -> dict:
    tot = _totals(results)
    comps, stag = [], []
    for label in tot:
        m = re.fullmatch(r"pair/r(-?\d+)-r(-?\d+)/w(\d+)", label)
        if not m:
            continue
        a, b, w = int(m.group(1)), int(m.group(2)), int(m.group(3))
        parts = [f"single/r{r}/L4/w{w}" for r in (a, b)]
        for lab in parts:
            if lab not in tot:
                raise BatchError(f"missing results for {lab}")
        comps.append(compare_pair(label, (a, b), tot[label], tot[parts[0]], tot[parts[1]]))
        s_label = label.replace("pair/", "staggered/")
        if s_label in tot:
            zero = np.zeros(len(tot[label]))
            stag.append(compare_pair(label, (a, b), tot[label], tot[s_label], zero))
    write_pair_report(out / "pair_report.csv", comps)
    info = {"pairs": len(comps),
            "pairs_async_ge_concurrent": int(sum(c.async_mean >= c.concurrent_mean for c in comps))}
    if stag:
        with (out / "pair_staggered.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["pair", "concurrent_mean", "staggered_mean", "p_value"])
            for c in stag:
                w.writerow([c.pair, fmt(c.concurrent_mean), fmt(c.async_mean), fmt(c.p_value)])
    return info


def _write_nationwide(out: Path, results) -> dict:
    conc = [s for s in results if s.label == "nationwide/concurrent"]
    asyn = [s for s in results if s.label.startswith("nationwide/async/")]
    if not conc or not asyn:
        return {}
    if len(conc) < 3 or len(asyn) < 3:
        return {"nationwide": {"concurrent_mean": float(np.mean([s.total_loss for s in conc])),
                               "async_mean": float(np.mean([s.total_loss for s in asyn])),
                               "p_value": None}}
    c = nationwide_report(conc, asyn)
    with (out / "nationwide_report.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["concurrent_mean", "async_mean", "p_value"])
        w.writerow([fmt(c.concurrent_mean), fmt(c.async_mean), fmt(c.p_value)])
    return {"nationwide": {"concurrent_mean": c.concurrent_mean, "async_mean": c.async_mean, "p_value": c.p_value}}


class _Row:
    """Minimal stand-in for a run summary, rebuilt from losses.csv."""

    def __init__(self, label, run, restricted):
        self.label, self.run, self.restricted = label, run, restricted
        self.regions, self.grp_loss, self.grp_baseline, self.horizon, self.total_loss = [], [], [], 0, 0.0

    @property
    def grp_loss_rate(self):
        loss, base = np.array(self.grp_loss), np.array(self.grp_baseline) * self.horizon
        return np.divide(loss, base, out=np.zeros_like(loss), where=base > 0)


def cmd_report(opts):
    src = Path(opts["inp"]) / "losses.csv"
    rows: dict[tuple[str, int], _Row] = {}
    with src.open(encoding="utf-8", newline="") as f:
        for lineno, rec in enumerate(csv.DictReader(f), start=2):
            try:
                key = (rec["schedule"], int(rec["run"]))
                r = rows.get(key)
                if r is None:
                    restricted = tuple(int(x) for x in rec["restricted"].split())
                    r = rows[key] = _Row(key[0], key[1], restricted)
                r.regions.append(int(rec["region"]))
                r.grp_loss.append(float(rec["grp_loss"]))
                r.grp_baseline.append(float(rec["grp_baseline"]))
                r.horizon = int(rec["horizon"])
                r.total_loss = float(rec["total_loss"])
            except (KeyError, ValueError) as e:
                raise ValueError(f"{src}:{lineno}: malformed row ({e})") from None
    results = list(rows.values())
    for r in results:
        r.regions = tuple(r.regions)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    info = {"command": "report", "source": src.name, "versions": _versions(), "runs": len(results)}
    if any(r.label.startswith("pair/") for r in results):
        info.update(_write_pairs(out, results))
    elif any(r.label.startswith("nationwide/") for r in results):
        info.update(_write_nationwide(out, results))
    else:
        regions = sorted({reg for r in results for reg in r.restricted})
        info["loss_matrices"] = _write_matrices(out, results, regions)
    write_json(out / "report.json", info)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve(args)
        if args.command == "generate":
            cmd_generate(opts)
        elif args.command == "calibrate":
            cmd_calibrate(opts)
        elif args.command == "diagnose":
            cmd_diagnose(opts)
        elif args.command == "simulate":
            cmd_simulate(opts)
        elif args.command == "scenario":
            cmd_scenario(opts, args.family)
        else:
            cmd_report(opts)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"supplyshock: error: {e}", file=sys.stderr)
        return 1
    except (*DATA_ERRORS, json.JSONDecodeError) as e:
        print(f"supplyshock: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
