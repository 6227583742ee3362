"""
Estimation of link volumes and final consumption from firm sales and an IO table.

Two passes: each supplier's sales are split across its clients in
proportion to client sales (tentative volumes), then every sector pair is
rescaled so the network total matches the IO transaction value. Final
demand of a sector is spread over its firms by sales weight.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .network import SupplyNetwork

logger = logging.getLogger(__name__)

__all__ = [
    "IoTable",
    "CalibratedNetwork",
    "CalibrationReport",
    "CalibrationError",
    "allocate_tentative",
    "scale_to_io",
    "calibrate",
    "from_calibrated",
    "load_io_table",
    "save_io_table",
    "random_io_table",
]

DAYS_PER_YEAR = 365


class CalibrationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IoTable:
    """Sector-by-sector annual transactions plus final demand.

    ``transactions[s, t]`` is the annual value sold by sector ``sectors[s]``
    to sector ``sectors[t]``.
    """

    sectors: tuple[int, ...]
    transactions: np.ndarray
    final_demand: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sectors", tuple(int(s) for s in self.sectors))
        t = np.asarray(self.transactions, dtype=float)
        fd = np.asarray(self.final_demand, dtype=float)
        k = len(self.sectors)
        if len(set(self.sectors)) != k:
            raise CalibrationError("duplicate sector code in IO table")
        if t.shape != (k, k) or fd.shape != (k,):
            raise CalibrationError(f"IO table must be {k}x{k} with {k} final-demand entries")
        if np.any(t < 0) or np.any(fd < 0) or not (np.isfinite(t).all() and np.isfinite(fd).all()):
            raise CalibrationError("IO table entries must be finite and >= 0")
        object.__setattr__(self, "transactions", t)
        object.__setattr__(self, "final_demand", fd)

    def index_of(self, codes) -> np.ndarray:
        lookup = {s: i for i, s in enumerate(self.sectors)}
        try:
            return np.array([lookup[int(c)] for c in codes], dtype=np.int64)
        except KeyError as e:
            raise CalibrationError(f"sector {e.args[0]} missing from IO table") from None


@dataclass
class CalibrationReport:
    """Mass that could not be placed on the network."""

    dropped_pairs: list[tuple[int, int, float]] = field(default_factory=list)
    sectors_without_firms: list[tuple[int, float]] = field(default_factory=list)
    zero_sales_sectors: list[int] = field(default_factory=list)

    @property
    def dropped_transactions(self) -> float:
        return float(sum(v for _, _, v in self.dropped_pairs))


@dataclass(frozen=True, eq=False)
class CalibratedNetwork:
    """Network with volumes filled in and the implied initial production.

    ``p_ini[i]`` is the sum of firm ``i``'s outgoing daily volumes plus its
    final consumption.
    """

    net: SupplyNetwork
    p_ini: np.ndarray
    report: CalibrationReport = field(default_factory=CalibrationReport)

    @property
    def firm_count(self) -> int:
        return self.net.firm_count


def initial_production(net: SupplyNetwork) -> np.ndarray:
    return np.bincount(net.supplier, weights=net.volume, minlength=net.firm_count) + net.final_consumption


def from_calibrated(net: SupplyNetwork) -> CalibratedNetwork:
    """Wrap a network that already carries volumes (e.g. loaded from CSV)."""
    return CalibratedNetwork(net, initial_production(net))


def allocate_tentative(net: SupplyNetwork) -> np.ndarray:
    """Split each supplier's sales over its clients in proportion to client sales.

    Returns one tentative annual value per link. A supplier whose clients
    all have zero sales splits equally.
    """
    n = net.firm_count
    sup, cli, sales = net.supplier, net.client, net.sales
    denom = np.bincount(sup, weights=sales[cli], minlength=n)
    count = np.bincount(sup, minlength=n)
    d = denom[sup]
    out = np.empty(net.link_count)
    pos = d > 0
    out[pos] = sales[sup[pos]] * sales[cli[pos]] / d[pos]
    out[~pos] = sales[sup[~pos]] / count[sup[~pos]]
    return out


def scale_to_io(net: SupplyNetwork, tentative, io: IoTable,
                days_per_year: float = DAYS_PER_YEAR) -> CalibratedNetwork:
    """Rescale tentative volumes to the IO table and assign final consumption.

    Parameters
    ----------
    net : SupplyNetwork
    tentative : array_like, shape (link_count,)
        Output of :func:`allocate_tentative`.
    io : IoTable
        Annual sector-pair transactions and final demand.
    days_per_year : float
        Divisor turning annual values into daily ones.

    Returns
    -------
    CalibratedNetwork
        Daily volumes, final consumption and ``p_ini``; the attached report
        lists IO mass with no matching links, sectors without firms and
        sectors whose firms all have zero sales.
    """
    tentative = np.asarray(tentative, dtype=float)
    k = len(io.sectors)
    firm_sector = io.index_of(net.sector)
    report = CalibrationReport()

    pair = firm_sector[net.supplier] * k + firm_sector[net.client]
    flow = np.bincount(pair, weights=tentative, minlength=k * k)
    target = io.transactions.ravel()
    ratio = np.zeros(k * k)
    has = flow > 0
    ratio[has] = target[has] / flow[has]
    for p in np.flatnonzero(~has & (target > 0)):
        s, t = divmod(int(p), k)
        report.dropped_pairs.append((io.sectors[s], io.sectors[t], float(target[p])))
    if report.dropped_pairs:
        logger.warning(
            "%d sector pair(s) have IO value but no network flow; %.6g dropped",
            len(report.dropped_pairs), report.dropped_transactions,
        )
    volume = tentative * ratio[pair] / days_per_year

    n = net.firm_count
    sector_sales = np.bincount(firm_sector, weights=net.sales, minlength=k)
    sector_count = np.bincount(firm_sector, minlength=k)
    fd = io.final_demand
    weight = np.zeros(n)
    pos = sector_sales[firm_sector] > 0
    weight[pos] = net.sales[pos] / sector_sales[firm_sector[pos]]
    eq = ~pos & (sector_count[firm_sector] > 0)
    weight[eq] = 1.0 / sector_count[firm_sector[eq]]
    for s in np.flatnonzero((sector_count > 0) & (sector_sales <= 0) & (fd > 0)):
        report.zero_sales_sectors.append(io.sectors[s])
        logger.warning("sector %s: all firms have zero sales; final demand split equally", io.sectors[s])
    for s in np.flatnonzero((sector_count == 0) & (fd > 0)):
        report.sectors_without_firms.append((io.sectors[s], float(fd[s])))
        logger.warning("sector %s has final demand but no firms", io.sectors[s])
    consumption = fd[firm_sector] * weight / days_per_year

    cal_net = net.with_volumes(volume, consumption)
    return CalibratedNetwork(cal_net, initial_production(cal_net), report)


def calibrate(net: SupplyNetwork, io: IoTable, days_per_year: float = DAYS_PER_YEAR) -> CalibratedNetwork:
    return scale_to_io(net, allocate_tentative(net), io, days_per_year)


FINAL_DEMAND_LABEL = "FINAL_DEMAND"


def load_io_table(path) -> IoTable:
    """Read an IO table CSV.

    The header row holds sector codes after a leading label cell; each
    following row starts with the supplier sector code, and the last row is
    labelled ``FINAL_DEMAND``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        rows = [r for r in csv.reader(f) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise CalibrationError(f"{path}: too few rows")
    try:
        sectors = [int(c) for c in rows[0][1:]]
    except ValueError:
        raise CalibrationError(f"{path}:1: sector codes must be integers") from None
    k = len(sectors)
    trans = np.zeros((k, k))
    fd = None
    seen = set()
    index = {s: i for i, s in enumerate(sectors)}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != k + 1:
            raise CalibrationError(f"{path}:{lineno}: expected {k + 1} fields, got {len(row)}")
        try:
            values = [float(c) for c in row[1:]]
        except ValueError:
            raise CalibrationError(f"{path}:{lineno}: malformed number") from None
        label = row[0].strip()
        if label == FINAL_DEMAND_LABEL:
            fd = np.array(values)
            continue
        try:
            s = index[int(label)]
        except (ValueError, KeyError):
            raise CalibrationError(f"{path}:{lineno}: unknown row sector {label!r}") from None
        if s in seen:
            raise CalibrationError(f"{path}:{lineno}: duplicate row for sector {label}")
        seen.add(s)
        trans[s] = values
    if fd is None:
        raise CalibrationError(f"{path}: missing {FINAL_DEMAND_LABEL} row")
    return IoTable(tuple(sectors), trans, fd)


def save_io_table(io: IoTable, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sector", *io.sectors])
        for s, row in zip(io.sectors, io.transactions):
            w.writerow([s, *map(repr, row.tolist())])
        w.writerow([FINAL_DEMAND_LABEL, *map(repr, io.final_demand.tolist())])


def random_io_table(sectors: Sequence[int], seed: int = 0, scale: float = 1e6,
                    final_share: float = 0.4) -> IoTable:
    """Dense random IO table; ``final_share`` of each sector's output goes to final demand."""
    rng = np.random.default_rng(seed)
    k = len(sectors)
    trans = rng.gamma(1.0, scale, size=(k, k))
    inter = trans.sum(axis=1)
    fd = inter * final_share / (1.0 - final_share)
    return IoTable(tuple(sectors), trans, fd)
