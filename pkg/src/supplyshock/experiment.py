"""
Monte Carlo batches, loss accounting and report files.

GDP on a day is the sum over firms of value added scaled by utilisation,
``v_i * P_act_i / P_ini_i`` with ``v_i = max(0, P_ini_i - inputs_i)``.
GRP is the same sum restricted to one region. Losses are shortfalls
against the pre-shock level accumulated over the whole horizon.
"""

from __future__ import annotations

import csv
import hashlib
import json
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .calibration import CalibratedNetwork
from .dynamics import SimParams, SimulationError, init_state, iter_days
from .scenarios import PairScenario
from .shock import CompiledSchedule, LockdownSchedule, SectorTable
from .stats import wilcoxon_rank_sum

__all__ = [
    "LossSummary",
    "PairComparison",
    "NationwideComparison",
    "BatchError",
    "value_added",
    "derive_seed",
    "run_single",
    "run_batch",
    "loss_matrix",
    "pair_report",
    "compare_pair",
    "group_by_label",
    "nationwide_report",
    "write_loss_matrix",
    "write_pair_report",
    "write_gdp_timeseries",
    "write_losses",
    "write_json",
    "fmt",
]


class BatchError(RuntimeError):
    pass


def fmt(x: float) -> str:
    """Nine significant digits, the precision of every emitted number."""
    return format(float(x), ".9g")


def value_added(cal: CalibratedNetwork, firm: int | None = None):
    """Daily pre-shock value added per firm, clamped at zero (or for one ``firm``)."""
    inputs = np.bincount(cal.net.client, weights=cal.net.volume, minlength=cal.firm_count)
    v = np.maximum(0.0, cal.p_ini - inputs)
    return v if firm is None else float(v[firm])


def derive_seed(master: int, label: str, run: int) -> int:
    h = hashlib.blake2b(f"{master}\x1f{label}\x1f{run}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass
class LossSummary:
    """Losses of one simulated run.

    ``grp_loss[k]`` is the cumulative GRP shortfall of ``regions[k]``;
    ``total_loss`` sums them (the GDP loss). ``gdp`` is the daily series.
    """

    label: str
    run: int
    seed: int
    regions: tuple[int, ...]
    restricted: tuple[int, ...]
    grp_loss: np.ndarray
    grp_baseline: np.ndarray
    total_loss: float
    gdp: np.ndarray
    baseline_gdp: float
    gross_output_loss: float
    clamp_events: int = 0

    @property
    def horizon(self) -> int:
        return len(self.gdp)

    @property
    def grp_loss_rate(self) -> np.ndarray:
        denom = self.grp_baseline * self.horizon
        return np.divide(self.grp_loss, denom, out=np.zeros_like(self.grp_loss), where=denom > 0)


class _Accounts:
    """Per-network constants for loss accounting."""

    def __init__(self, cal: CalibratedNetwork):
        self.v = value_added(cal)
        self.regions = cal.net.regions
        self.region_idx = np.searchsorted(self.regions, cal.net.region)
        self.safe_p_ini = np.where(cal.p_ini > 0, cal.p_ini, 1.0)
        self.grp_baseline = np.bincount(self.region_idx, weights=self.v, minlength=len(self.regions))
        self.baseline_gdp = float(self.v.sum())
        self.baseline_gross = float(cal.p_ini.sum())


def run_single(cal: CalibratedNetwork, label: str, schedule: LockdownSchedule,
               table: SectorTable, params: SimParams, run: int = 0, master_seed: int = 0,
               overrides: Mapping | None = None, accounts: _Accounts | None = None,
               seed: int | None = None, on_day=None) -> LossSummary:
    """Simulate one schedule once and account for its losses.

    ``on_day`` is called with every day record as it is produced.
    """
    acc = _Accounts(cal) if accounts is None else accounts
    seed = derive_seed(master_seed, label, run) if seed is None else seed
    p = SimParams(**{**params.__dict__, "seed": seed, "horizon_days": schedule.horizon_days})
    state = init_state(cal, p)
    compiled = CompiledSchedule(cal.net, schedule, table, overrides)
    horizon = schedule.horizon_days
    gdp = np.empty(horizon)
    grp_loss = np.zeros(len(acc.regions))
    gross = 0.0
    try:
        for rec in iter_days(cal, compiled, table, p, state):
            if on_day is not None:
                on_day(rec)
            va = acc.v * (rec.p_act / acc.safe_p_ini)
            gdp[rec.day] = va.sum()
            grp_loss += acc.grp_baseline - np.bincount(acc.region_idx, weights=va, minlength=len(acc.regions))
            gross += acc.baseline_gross - float(rec.p_act.sum())
    except SimulationError as e:
        raise BatchError(f"{label} run {run}: {e}") from e
    return LossSummary(
        label=label,
        run=run,
        seed=seed,
        regions=tuple(int(r) for r in acc.regions),
        restricted=tuple(sorted({w.region for w in schedule.windows})),
        grp_loss=grp_loss,
        grp_baseline=acc.grp_baseline,
        total_loss=float(np.sum(acc.baseline_gdp - gdp)),
        gdp=gdp,
        baseline_gdp=acc.baseline_gdp,
        gross_output_loss=gross,
        clamp_events=state.clamp_events,
    )


_WORKER: dict = {}


def _init_worker(cal, table, params, overrides, master_seed):
    _WORKER.update(cal=cal, table=table, params=params, overrides=overrides,
                   seed=master_seed, acc=_Accounts(cal))


def _work(task):
    label, schedule, run, seed = task
    w = _WORKER
    return run_single(w["cal"], label, schedule, w["table"], w["params"], run, w["seed"],
                      w["overrides"], w["acc"], seed)


def run_batch(cal: CalibratedNetwork, schedules: Sequence[tuple[str, LockdownSchedule]],
              table: SectorTable, params: SimParams = SimParams(), mc_runs: int = 30,
              seed: int = 0, workers: int = 1, overrides: Mapping | None = None,
              seeds: Mapping[str, Sequence[int]] | None = None) -> list[LossSummary]:
    """Run every schedule ``mc_runs`` times.

    Run ``r`` of schedule ``label`` draws its randomness from
    ``derive_seed(seed, label, r)`` (or ``seeds[label][r]`` when given),
    so results do not depend on ``workers``. Output is ordered by schedule,
    then run index.
    """
    if mc_runs < 1:
        raise ValueError("mc_runs must be >= 1")
    tasks = []
    for label, sched in schedules:
        for r in range(mc_runs):
            s = seeds[label][r] if seeds and label in seeds else derive_seed(seed, label, r)
            tasks.append((label, sched, r, s))
    if not tasks:
        return []
    if workers <= 1:
        _init_worker(cal, table, params, overrides, seed)
        try:
            return [_work(t) for t in tasks]
        finally:
            _WORKER.clear()
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_init_worker,
                             initargs=(cal, table, params, overrides, seed)) as ex:
        chunk = max(1, len(tasks) // (4 * workers))
        return list(ex.map(_work, tasks, chunksize=chunk))


def group_by_label(results: Iterable[LossSummary]) -> dict[str, list[LossSummary]]:
    out: dict[str, list[LossSummary]] = {}
    for s in results:
        out.setdefault(s.label, []).append(s)
    return out


def loss_matrix(results: Iterable[LossSummary], regions: Sequence[int]) -> np.ndarray:
    """Region-by-region GRP loss rates from single-region runs.

    Row = restricted region, column = affected region, averaged over runs.
    Pass results of one coverage level and duration only.
    """
    rows: dict[int, list[np.ndarray]] = {}
    cols = None
    for s in results:
        if len(s.restricted) != 1:
            raise BatchError(f"{s.label}: not a single-region run")
        rows.setdefault(s.restricted[0], []).append(s.grp_loss_rate)
        cols = s.regions
    if cols is None:
        raise BatchError("no results")
    col_idx = []
    for r in regions:
        if r not in cols:
            raise BatchError(f"region {r} absent from the network")
        col_idx.append(cols.index(r))
    m = np.zeros((len(regions), len(regions)))
    for i, r in enumerate(regions):
        if r not in rows:
            raise BatchError(f"no single-region result for region {r}")
        m[i] = np.mean(rows[r], axis=0)[col_idx]
    return m


@dataclass
class PairComparison:
    pair: str
    regions: tuple[int, int]
    concurrent_mean: float
    async_mean: float
    p_value: float
    concurrent_losses: np.ndarray = field(repr=False, default=None)
    async_losses: np.ndarray = field(repr=False, default=None)


def compare_pair(label: str, regions: tuple[int, int], concurrent, part_a, part_b) -> PairComparison:
    """Compare per-run concurrent losses with the summed single-region losses."""
    conc = np.asarray(concurrent, dtype=float)
    a = np.asarray(part_a, dtype=float)
    b = np.asarray(part_b, dtype=float)
    if not len(conc) == len(a) == len(b):
        raise BatchError(f"{label}: mismatched run counts {len(conc)}, {len(a)}, {len(b)}")
    asyn = a + b
    pv = wilcoxon_rank_sum(conc, asyn) if len(conc) >= 3 else float("nan")
    return PairComparison(label, regions, float(conc.mean()), float(asyn.mean()), pv, conc, asyn)


def pair_report(pairs: Sequence[PairScenario], results: Iterable[LossSummary]) -> list[PairComparison]:
    """Concurrent vs asynchronous GDP losses for each region pair.

    The asynchronous loss of run ``r`` is the sum of run ``r`` of each
    single-region part.
    """
    by = group_by_label(results)

    def totals(label):
        if label not in by:
            raise BatchError(f"missing results for {label}")
        return [s.total_loss for s in by[label]]

    return [
        compare_pair(p.label, p.regions, totals(p.label), *(totals(lab) for lab, _ in p.async_parts))
        for p in pairs
        if p.regions[0] != p.regions[1]
    ]


@dataclass
class NationwideComparison:
    concurrent_mean: float
    async_mean: float
    p_value: float
    concurrent_losses: np.ndarray = field(repr=False)
    async_losses: np.ndarray = field(repr=False)


def nationwide_report(concurrent: Sequence[LossSummary], asynchronous: Sequence[LossSummary]) -> NationwideComparison:
    c = np.array([s.total_loss for s in concurrent])
    a = np.array([s.total_loss for s in asynchronous])
    return NationwideComparison(float(c.mean()), float(a.mean()), wilcoxon_rank_sum(c, a), c, a)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _writer(path):
    f = Path(path).open("w", newline="", encoding="utf-8")
    return f, csv.writer(f, lineterminator="\n")


def write_loss_matrix(path, matrix: np.ndarray, regions: Sequence[int]) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(["restricted", *regions])
        for r, row in zip(regions, matrix):
            w.writerow([r, *map(fmt, row)])


def write_pair_report(path, comparisons: Sequence[PairComparison]) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(["pair", "concurrent_mean", "async_mean", "p_value"])
        for c in comparisons:
            w.writerow([c.pair, fmt(c.concurrent_mean), fmt(c.async_mean), fmt(c.p_value)])


def write_gdp_timeseries(path, results: Sequence[LossSummary]) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(["schedule", "run", "day", "gdp"])
        for s in results:
            for day, g in enumerate(s.gdp):
                w.writerow([s.label, s.run, day, fmt(g)])


def write_losses(path, results: Sequence[LossSummary]) -> None:
    """Per-run totals and per-region GRP losses, the input of report generation.

    Written at round-trip precision so rebuilt tables match the originals.
    """
    f, w = _writer(path)
    with f:
        w.writerow(["schedule", "run", "seed", "restricted", "region", "grp_loss", "grp_baseline", "horizon", "total_loss"])
        for s in results:
            restricted = " ".join(map(str, s.restricted))
            for r, loss, base in zip(s.regions, s.grp_loss, s.grp_baseline):
                w.writerow([s.label, s.run, s.seed, restricted, r, repr(float(loss)), repr(float(base)), s.horizon,
                            repr(float(s.total_loss))])


def write_json(path, payload: dict) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        json.dump(_rounded(payload), f, indent=2, sort_keys=True)
        f.write("\n")


def _rounded(o):
    if isinstance(o, dict):
        return {str(k): _rounded(v) for k, v in o.items()}
    if isinstance(o, (list, tuple, np.ndarray)):
        return [_rounded(v) for v in o]
    if isinstance(o, (bool, np.bool_)) or o is None or isinstance(o, str):
        return bool(o) if isinstance(o, np.bool_) else o
    if isinstance(o, (int, np.integer)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        x = float(o)
        return float(fmt(x)) if np.isfinite(x) else None
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")
