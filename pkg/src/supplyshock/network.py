"""
Firm-level supply-chain graph: construction, CSV I/O and structural diagnostics.

Firms are dense integer ids ``0..firm_count-1``. Links are directed
supplier -> client and carry the calibrated daily volume ``volume`` (zero
until calibration fills it in).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

__all__ = [
    "Firm",
    "SupplyNetwork",
    "SyntheticConfig",
    "NetworkDiagnostics",
    "NetworkError",
    "GenerationError",
    "generate_synthetic",
    "load_edge_list",
    "load_network",
    "save_network",
    "diagnostics",
]


class NetworkError(ValueError):
    """Raised for malformed or inconsistent network input."""


class GenerationError(NetworkError):
    """Raised when a synthetic network cannot satisfy its constraints."""


@dataclass(frozen=True)
class Firm:
    id: int
    sector: int
    region: int
    sales: float


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SupplyNetwork:
    """Immutable supply network stored as flat numpy arrays.

    Attributes
    ----------
    sector, region, sales : ndarray, shape (firm_count,)
        Per-firm attributes.
    supplier, client : ndarray, shape (link_count,)
        Link endpoints. ``supplier[k]`` delivers to ``client[k]``.
    volume : ndarray, shape (link_count,)
        Daily trade volume per link.
    final_consumption : ndarray, shape (firm_count,)
        Daily sales of each firm to final consumers.
    """

    sector: np.ndarray
    region: np.ndarray
    sales: np.ndarray
    supplier: np.ndarray
    client: np.ndarray
    volume: np.ndarray = None
    final_consumption: np.ndarray = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        n = len(self.sector)
        set_ = object.__setattr__
        set_(self, "sector", _frozen(self.sector, np.int64))
        set_(self, "region", _frozen(self.region, np.int64))
        set_(self, "sales", _frozen(self.sales, np.float64))
        set_(self, "supplier", _frozen(self.supplier, np.int64))
        set_(self, "client", _frozen(self.client, np.int64))
        m = len(self.supplier)
        vol = np.zeros(m) if self.volume is None else self.volume
        fc = np.zeros(n) if self.final_consumption is None else self.final_consumption
        set_(self, "volume", _frozen(vol, np.float64))
        set_(self, "final_consumption", _frozen(fc, np.float64))
        if self.validate:
            self._check()

    def _check(self):
        n, m = self.firm_count, self.link_count
        if not (len(self.region) == len(self.sales) == len(self.final_consumption) == n):
            raise NetworkError("per-firm arrays must all have firm_count entries")
        if not (len(self.client) == len(self.volume) == m):
            raise NetworkError("per-link arrays must all have link_count entries")
        if m:
            if self.supplier.min() < 0 or self.client.min() < 0 or max(
                self.supplier.max(), self.client.max()
            ) >= n:
                raise NetworkError("link endpoint outside [0, firm_count)")
            if np.any(self.supplier == self.client):
                k = int(np.flatnonzero(self.supplier == self.client)[0])
                raise NetworkError(f"self-loop on firm {int(self.supplier[k])}")
            keys = self.supplier * n + self.client
            if len(np.unique(keys)) != m:
                raise NetworkError("duplicate (supplier, client) link")
        if np.any(self.sales < 0) or not np.all(np.isfinite(self.sales)):
            raise NetworkError("sales must be finite and >= 0")
        if np.any(self.volume < 0) or np.any(self.final_consumption < 0):
            raise NetworkError("volumes and final consumption must be >= 0")

    @property
    def firm_count(self) -> int:
        return len(self.sector)

    @property
    def link_count(self) -> int:
        return len(self.supplier)

    def firm(self, i: int) -> Firm:
        return Firm(int(i), int(self.sector[i]), int(self.region[i]), float(self.sales[i]))

    @cached_property
    def out_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Forward adjacency ``(ptr, links)``: links of supplier i are ``links[ptr[i]:ptr[i+1]]``."""
        return _csr(self.supplier, self.firm_count)

    @cached_property
    def in_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Reverse adjacency by client, same layout as :attr:`out_index`."""
        return _csr(self.client, self.firm_count)

    def clients_of(self, i: int) -> np.ndarray:
        ptr, links = self.out_index
        return self.client[links[ptr[i]:ptr[i + 1]]]

    def suppliers_of(self, i: int) -> np.ndarray:
        ptr, links = self.in_index
        return self.supplier[links[ptr[i]:ptr[i + 1]]]

    @cached_property
    def regions(self) -> np.ndarray:
        return np.unique(self.region)

    @cached_property
    def sectors(self) -> np.ndarray:
        return np.unique(self.sector)

    def with_volumes(self, volume, final_consumption) -> "SupplyNetwork":
        return SupplyNetwork(
            self.sector, self.region, self.sales, self.supplier, self.client,
            volume, final_consumption,
        )


def _csr(key: np.ndarray, n: int):
    order = np.argsort(key, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(key, minlength=n), out=ptr[1:])
    return ptr, order


# ---------------------------------------------------------------------------
# Synthetic generation
# ---------------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    """Parameters for :func:`generate_synthetic`.

    ``region_weights`` and ``sector_weights`` map ids to sampling weights;
    region weights must sum to 1. Sales are log-normal with the given
    parameters (of the underlying normal). ``intra_region_share`` is the
    probability that a link's client is drawn from the supplier's own region.
    """

    firm_count: int
    link_count: int
    region_weights: Mapping[int, float]
    sector_weights: Mapping[int, float]
    exponent: float = 2.4
    sales_log_mean: float = 0.0
    sales_log_sigma: float = 1.5
    intra_region_share: float = 0.0
    seed: int = 0
    max_redraw_rounds: int = 200


def _power_law_degrees(n, total, exponent, rng):
    # continuous Pareto floored to integers, then rescaled so the sum hits `total`
    u = rng.random(n)
    raw = np.floor((1.0 - u) ** (-1.0 / (exponent - 1.0)))
    raw = np.minimum(raw, n - 1)
    scaled = raw * (total / raw.sum())
    deg = np.floor(scaled).astype(np.int64)
    deg += rng.random(n) < (scaled - deg)
    deg = np.minimum(deg, n - 1)
    diff = total - int(deg.sum())
    for _ in range(10_000):
        if diff == 0:
            break
        if diff > 0:
            room = np.flatnonzero(deg < n - 1)
            w = deg[room] + 1.0
            pick = rng.choice(room, size=min(diff, len(room)), replace=False, p=w / w.sum())
            deg[pick] += 1
        else:
            have = np.flatnonzero(deg > 0)
            w = deg[have].astype(float)
            pick = rng.choice(have, size=min(-diff, len(have)), replace=False, p=w / w.sum())
            deg[pick] -= 1
        diff = total - int(deg.sum())
    if diff != 0:
        raise GenerationError(f"could not match link_count={total} with an out-degree sequence")
    return deg


def generate_synthetic(config: SyntheticConfig) -> SupplyNetwork:
    """Random scale-free supply network.

    Out-degrees follow a discrete power law; each outgoing stub is paired
    with a uniformly drawn client (optionally biased to the supplier's
    region). Self-loops and duplicate pairs are rejected and redrawn.
    Volumes are left at zero.
    """
    n, m = config.firm_count, config.link_count
    if n < 2:
        raise GenerationError("firm_count must be >= 2")
    if m < n - 1:
        raise GenerationError(f"link_count must be >= firm_count - 1 (got {m} < {n - 1})")
    if m > n * (n - 1):
        raise GenerationError(f"link_count {m} exceeds the n(n-1)={n * (n - 1)} possible links")
    rw = np.array(list(config.region_weights.values()), dtype=float)
    if abs(rw.sum() - 1.0) > 1e-9:
        raise GenerationError(f"region weights must sum to 1 (got {rw.sum()!r})")
    sw = np.array(list(config.sector_weights.values()), dtype=float)
    if np.any(sw < 0) or sw.sum() <= 0:
        raise GenerationError("sector weights must be non-negative with positive sum")
    if not 2.0 < config.exponent:
        raise GenerationError("power-law exponent must exceed 2")

    rng = np.random.default_rng(config.seed)
    region_ids = np.array(list(config.region_weights.keys()), dtype=np.int64)
    sector_ids = np.array(list(config.sector_weights.keys()), dtype=np.int64)
    region = region_ids[rng.choice(len(region_ids), size=n, p=rw)]
    sector = sector_ids[rng.choice(len(sector_ids), size=n, p=sw / sw.sum())]
    sales = rng.lognormal(config.sales_log_mean, config.sales_log_sigma, size=n)

    deg = _power_law_degrees(n, m, config.exponent, rng)
    supplier = np.repeat(np.arange(n, dtype=np.int64), deg)

    # firms grouped by region for the local draws
    by_region = np.argsort(region, kind="stable")
    r_codes = np.searchsorted(np.sort(region_ids), region)
    r_start = np.searchsorted(region[by_region], np.sort(region_ids), side="left")
    r_size = np.bincount(r_codes, minlength=len(region_ids))

    def draw(sups):
        out = rng.integers(0, n, size=len(sups))
        if config.intra_region_share > 0:
            local = rng.random(len(sups)) < config.intra_region_share
            rc = r_codes[sups[local]]
            ok = r_size[rc] > 1
            loc_idx = np.flatnonzero(local)[ok]
            rc = rc[ok]
            off = (rng.random(len(rc)) * r_size[rc]).astype(np.int64)
            out[loc_idx] = by_region[r_start[rc] + off]
        return out

    client = draw(supplier)
    for _ in range(config.max_redraw_rounds):
        keys = supplier * n + client
        _, first = np.unique(keys, return_index=True)
        bad = np.ones(m, dtype=bool)
        bad[first] = False
        bad |= supplier == client
        if not bad.any():
            break
        idx = np.flatnonzero(bad)
        client[idx] = draw(supplier[idx])
    else:
        raise GenerationError(
            "could not wire the degree sequence without self-loops or duplicate links "
            f"after {config.max_redraw_rounds} redraw rounds"
        )

    order = np.lexsort((client, supplier))
    return SupplyNetwork(sector, region, sales, supplier[order], client[order])


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def _read_rows(path, required):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise NetworkError(f"{path}: empty file") from None
        missing = [c for c in required if c not in header]
        if missing:
            raise NetworkError(f"{path}: header lacks column(s) {missing}")
        cols = {c: header.index(c) for c in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise NetworkError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, {c: row[i].strip() for c, i in cols.items()}


def _num(path, lineno, value, kind):
    try:
        return kind(value)
    except ValueError:
        raise NetworkError(f"{path}:{lineno}: malformed value {value!r}") from None


def load_edge_list(firms_path, links_path, final_consumption_path=None) -> SupplyNetwork:
    """Load firms and links CSVs (plus optional ``id,c`` final-consumption CSV).

    A ``volume_a`` column in the links file is read when present.
    """
    ids, sector, region, sales = [], [], [], []
    for lineno, r in _read_rows(firms_path, ("id", "sector", "region", "sales")):
        ids.append(_num(firms_path, lineno, r["id"], int))
        sector.append(_num(firms_path, lineno, r["sector"], int))
        region.append(_num(firms_path, lineno, r["region"], int))
        sales.append(_num(firms_path, lineno, r["sales"], float))
    n = len(ids)
    if n == 0:
        raise NetworkError(f"{firms_path}: no firms")
    ids = np.array(ids, dtype=np.int64)
    if len(np.unique(ids)) != n:
        raise NetworkError(f"{firms_path}: duplicate firm id")
    if ids.min() != 0 or ids.max() != n - 1:
        raise NetworkError(f"{firms_path}: firm ids must form the contiguous range 0..{n - 1}")
    order = np.argsort(ids)

    sup, cli, vol = [], [], []
    seen = set()
    has_volume = None
    for lineno, r in _read_rows(links_path, ("supplier", "client")):
        if has_volume is None:
            has_volume = "volume_a" in r
        s = _num(links_path, lineno, r["supplier"], int)
        c = _num(links_path, lineno, r["client"], int)
        for fid in (s, c):
            if not 0 <= fid < n:
                raise NetworkError(f"{links_path}:{lineno}: unknown firm id {fid}")
        if s == c:
            raise NetworkError(f"{links_path}:{lineno}: self-loop on firm {s}")
        if (s, c) in seen:
            raise NetworkError(f"{links_path}:{lineno}: duplicate link ({s}, {c})")
        seen.add((s, c))
        sup.append(s)
        cli.append(c)
        if has_volume:
            vol.append(_num(links_path, lineno, r["volume_a"], float))

    fc = np.zeros(n)
    if final_consumption_path is not None:
        for lineno, r in _read_rows(final_consumption_path, ("id", "c")):
            i = _num(final_consumption_path, lineno, r["id"], int)
            if not 0 <= i < n:
                raise NetworkError(f"{final_consumption_path}:{lineno}: unknown firm id {i}")
            fc[i] = _num(final_consumption_path, lineno, r["c"], float)

    return SupplyNetwork(
        np.array(sector)[order], np.array(region)[order], np.array(sales)[order],
        sup, cli, vol if has_volume else None, fc,
    )


def load_network(directory) -> SupplyNetwork:
    """Load ``firms.csv``, ``links.csv`` and (if present) ``final_consumption.csv`` from a directory."""
    d = Path(directory)
    fc = d / "final_consumption.csv"
    return load_edge_list(d / "firms.csv", d / "links.csv", fc if fc.exists() else None)


def save_network(net: SupplyNetwork, directory, *, calibrated: bool | None = None) -> None:
    """Write the network as CSV files into ``directory``.

    Volumes and final consumption are written when ``calibrated`` is true
    (default: when any volume or consumption is nonzero). Floats use
    ``repr`` so a round trip is exact.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    if calibrated is None:
        calibrated = bool(net.volume.any() or net.final_consumption.any())
    with (d / "firms.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "sector", "region", "sales"])
        for i in range(net.firm_count):
            w.writerow([i, int(net.sector[i]), int(net.region[i]), repr(float(net.sales[i]))])
    with (d / "links.csv").open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        if calibrated:
            w.writerow(["supplier", "client", "volume_a"])
            for s, c, v in zip(net.supplier.tolist(), net.client.tolist(), net.volume.tolist()):
                w.writerow([s, c, repr(v)])
        else:
            w.writerow(["supplier", "client"])
            w.writerows(zip(net.supplier.tolist(), net.client.tolist()))
    if calibrated:
        with (d / "final_consumption.csv").open("w", newline="", encoding="utf-8") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["id", "c"])
            for i, c in enumerate(net.final_consumption.tolist()):
                w.writerow([i, repr(c)])


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkDiagnostics:
    gscc_share: float
    avg_path_length: float
    degree_tail_exponent: float


def gscc_share(net: SupplyNetwork) -> float:
    """Share of firms in the largest strongly connected component of size >= 2."""
    n = net.firm_count
    g = sparse.csr_matrix(
        (np.ones(net.link_count), (net.supplier, net.client)), shape=(n, n)
    )
    _, labels = csgraph.connected_components(g, directed=True, connection="strong")
    sizes = np.bincount(labels)
    largest = sizes.max()
    return float(largest) / n if largest >= 2 else 0.0


def average_path_length(net: SupplyNetwork, sample_size: int = 1000, seed: int = 0,
                        chunk: int = 32) -> float:
    """Mean finite hop distance on the undirected view from sampled sources."""
    n = net.firm_count
    if net.link_count == 0:
        return math.nan
    g = sparse.csr_matrix(
        (np.ones(net.link_count), (net.supplier, net.client)), shape=(n, n)
    )
    g = ((g + g.T) > 0).astype(np.float64)
    rng = np.random.default_rng(seed)
    sources = np.sort(rng.choice(n, size=min(sample_size, n), replace=False))
    total, count = 0.0, 0
    for k in range(0, len(sources), chunk):
        d = csgraph.shortest_path(g, method="D", unweighted=True, indices=sources[k:k + chunk])
        ok = np.isfinite(d) & (d > 0)
        total += float(d[ok].sum())
        count += int(ok.sum())
    return total / count if count else math.nan


def degree_tail_exponent(degrees, x_min: int = 5) -> float:
    """Discrete power-law exponent by the approximate maximum-likelihood estimator."""
    x = np.asarray(degrees, dtype=float)
    x = x[x >= x_min]
    if len(x) < 2:
        return math.nan
    return 1.0 + len(x) / float(np.log(x / (x_min - 0.5)).sum())


def diagnostics(net: SupplyNetwork, path_sample_size: int = 1000, seed: int = 0,
                x_min: int = 5, degree: str = "out") -> NetworkDiagnostics:
    """Structural summary of ``net``.

    ``degree`` selects which degree sequence the tail exponent is fitted
    on: ``"out"`` (the generated power law), ``"in"`` or ``"total"``.
    """
    if net.firm_count == 0:
        raise NetworkError("empty network")
    out_deg = np.bincount(net.supplier, minlength=net.firm_count)
    in_deg = np.bincount(net.client, minlength=net.firm_count)
    try:
        deg = {"out": out_deg, "in": in_deg, "total": out_deg + in_deg}[degree]
    except KeyError:
        raise ValueError(f"degree must be 'out', 'in' or 'total', not {degree!r}") from None
    return NetworkDiagnostics(
        gscc_share=gscc_share(net),
        avg_path_length=average_path_length(net, path_sample_size, seed),
        degree_tail_exponent=degree_tail_exponent(deg, x_min),
    )
