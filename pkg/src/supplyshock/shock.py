"""
Sector reduction rates, restriction windows and per-firm capacity losses.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .network import Firm, SupplyNetwork

__all__ = [
    "DEFAULT_WEIGHT",
    "Rationale",
    "CoverageLevel",
    "SectorEntry",
    "SectorTable",
    "RestrictionWindow",
    "LockdownSchedule",
    "ShockError",
    "reduction_rate",
    "load_sector_table",
    "bundled_sector_table",
    "coverage_sectors",
    "load_coverage_overrides",
    "delta_at",
    "firm_deltas",
    "CompiledSchedule",
    "load_schedule",
    "save_schedule",
]

DEFAULT_WEIGHT = 0.323
IDENTITY_TOL = 5e-3


class ShockError(ValueError):
    pass


class Rationale(str, enum.Enum):
    SUBSTANTIAL = "Substantial"
    LIFELINE = "Lifeline"
    LOW_EXPOSURE = "LowExposure"
    ORDINARY = "Ordinary"
    CLOSED = "Closed"


class CoverageLevel(str, enum.Enum):
    """Sector coverage of a restriction, from narrowest (L1) to all sectors (L4)."""

    L1 = "L1"
    L2 = "L2"
    L3 = "L3"
    L4 = "L4"


EXPOSURE_LEVELS = (0.0, 0.1, 0.5, 1.0)


def reduction_rate(exposure: float, work_at_home: float) -> float:
    """Capacity lost when ``exposure`` of a sector stops, except work done from home."""
    return exposure * (1.0 - work_at_home)


@dataclass(frozen=True)
class SectorEntry:
    code: int
    abbrev: str
    adjusted_rate: float
    worldwide_rate: float
    work_at_home: float
    exposure: float
    rationale: Rationale

    def check(self, weight: float) -> None:
        for name in ("adjusted_rate", "worldwide_rate", "work_at_home"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ShockError(f"sector {self.code}: {name}={v} outside [0, 1]")
        if self.exposure not in EXPOSURE_LEVELS:
            raise ShockError(f"sector {self.code}: exposure {self.exposure} not in {EXPOSURE_LEVELS}")
        base = reduction_rate(self.exposure, self.work_at_home)
        if abs(self.worldwide_rate - base) > IDENTITY_TOL:
            raise ShockError(
                f"sector {self.code}: worldwide rate {self.worldwide_rate} != "
                f"exposure x (1 - work_at_home) = {base:.6g}"
            )
        if abs(self.adjusted_rate - weight * self.worldwide_rate) > IDENTITY_TOL:
            raise ShockError(
                f"sector {self.code}: adjusted rate {self.adjusted_rate} != "
                f"{weight} x worldwide = {weight * self.worldwide_rate:.6g}"
            )


@dataclass(frozen=True, eq=False)
class SectorTable:
    entries: Mapping[int, SectorEntry]
    weight: float = DEFAULT_WEIGHT

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise ShockError(f"weight must lie in (0, 1], got {self.weight}")

    def __getitem__(self, code: int) -> SectorEntry:
        return self.entries[int(code)]

    def __contains__(self, code) -> bool:
        return int(code) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(self.entries)

    def rate(self, code: int) -> float:
        return self.entries[int(code)].adjusted_rate

    def reweighted(self, weight: float) -> "SectorTable":
        """Copy with adjusted rates recomputed as ``weight * worldwide_rate``."""
        return SectorTable(
            {c: _replace_rate(e, weight * e.worldwide_rate) for c, e in self.entries.items()},
            weight,
        )

    def rate_lookup(self, codes) -> np.ndarray:
        """Adjusted rate for each code in ``codes`` (vectorised)."""
        try:
            return np.array([self.entries[int(c)].adjusted_rate for c in codes], dtype=float)
        except KeyError as e:
            raise ShockError(f"sector {e.args[0]} not in sector table") from None


def _replace_rate(e: SectorEntry, rate: float) -> SectorEntry:
    return SectorEntry(e.code, e.abbrev, rate, e.worldwide_rate, e.work_at_home, e.exposure, e.rationale)


def load_sector_table(path=None, weight: float = DEFAULT_WEIGHT) -> SectorTable:
    """Read a sector-rate CSV and validate every row against ``weight``.

    ``path=None`` loads the bundled table of Japanese JIS sectors.
    """
    if path is None:
        text = resources.files("supplyshock").joinpath("data/sector_rates.csv").read_text("utf-8")
        rows = list(csv.reader(text.splitlines()))
        where = "sector_rates.csv"
    else:
        with Path(path).open(newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        where = str(path)
    header = [h.strip() for h in rows[0]]
    expected = ["code", "abbrev", "adjusted_rate", "worldwide_rate", "work_at_home", "exposure", "rationale"]
    if header != expected:
        raise ShockError(f"{where}: header must be {','.join(expected)}")
    entries: dict[int, SectorEntry] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            code = int(row[0])
            entry = SectorEntry(
                code, row[1].strip(), float(row[2]), float(row[3]), float(row[4]),
                float(row[5]), Rationale(row[6].strip()),
            )
        except (ValueError, IndexError) as e:
            raise ShockError(f"{where}:{lineno}: malformed row ({e})") from None
        if code in entries:
            raise ShockError(f"{where}:{lineno}: duplicate sector code {code}")
        try:
            entry.check(weight)
        except ShockError as e:
            raise ShockError(f"{where}:{lineno}: {e}") from None
        entries[code] = entry
    return SectorTable(entries, weight)


_BUNDLED: SectorTable | None = None


def bundled_sector_table() -> SectorTable:
    global _BUNDLED
    if _BUNDLED is None:
        _BUNDLED = load_sector_table()
    return _BUNDLED


# accommodation (75) and amusement/recreation (80); eating places (76); retail trade
DEFAULT_COVERAGE = {
    CoverageLevel.L1: frozenset({75, 80}),
    CoverageLevel.L2: frozenset({75, 80, 76}),
    CoverageLevel.L3: frozenset({75, 80, 76, 560, 561, 57, 58, 59, 60, 61}),
}


def coverage_sectors(level, table: SectorTable, overrides: Mapping | None = None) -> frozenset[int]:
    """Sector codes restricted at a coverage level. L4 is every code in ``table``."""
    level = CoverageLevel(level)
    if overrides and level in overrides:
        return frozenset(overrides[level])
    if level is CoverageLevel.L4:
        return frozenset(table.codes)
    return DEFAULT_COVERAGE[level]


def load_coverage_overrides(path) -> dict[CoverageLevel, frozenset[int]]:
    """Read a ``level,codes`` CSV; codes are separated by spaces or semicolons."""
    out = {}
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = [h.strip() for h in next(reader)]
        if header != ["level", "codes"]:
            raise ShockError(f"{path}: header must be level,codes")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                level = CoverageLevel(row[0].strip())
                codes = frozenset(int(c) for c in row[1].replace(";", " ").split())
            except (ValueError, IndexError):
                raise ShockError(f"{path}:{lineno}: malformed row") from None
            out[level] = codes
    return out


@dataclass(frozen=True)
class RestrictionWindow:
    region: int
    start_day: int
    duration_days: int
    coverage: CoverageLevel = CoverageLevel.L4

    def __post_init__(self):
        object.__setattr__(self, "coverage", CoverageLevel(self.coverage))
        if self.start_day < 0:
            raise ShockError(f"start_day must be >= 0, got {self.start_day}")
        if self.duration_days <= 0:
            raise ShockError(f"duration_days must be > 0, got {self.duration_days}")

    @property
    def end_day(self) -> int:
        """First day after the window."""
        return self.start_day + self.duration_days

    def active(self, day: int) -> bool:
        return self.start_day <= day < self.end_day


@dataclass(frozen=True)
class LockdownSchedule:
    windows: tuple[RestrictionWindow, ...]
    horizon_days: int

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(self.windows))
        for w in self.windows:
            if w.end_day > self.horizon_days:
                raise ShockError(
                    f"window for region {w.region} ends at day {w.end_day}, past horizon {self.horizon_days}"
                )

    def to_dict(self) -> dict:
        return {
            "horizon_days": self.horizon_days,
            "windows": [
                {"region": w.region, "start_day": w.start_day,
                 "duration_days": w.duration_days, "coverage": w.coverage.value}
                for w in self.windows
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LockdownSchedule":
        try:
            windows = tuple(
                RestrictionWindow(int(w["region"]), int(w["start_day"]), int(w["duration_days"]),
                                  CoverageLevel(w.get("coverage", "L4")))
                for w in d["windows"]
            )
            return cls(windows, int(d["horizon_days"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ShockError(f"malformed schedule: {e}") from None


def load_schedule(path) -> LockdownSchedule:
    with Path(path).open(encoding="utf-8") as f:
        return LockdownSchedule.from_dict(json.load(f))


def save_schedule(schedule: LockdownSchedule, path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        json.dump(schedule.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def delta_at(firm: Firm, day: int, schedule: LockdownSchedule, table: SectorTable,
             overrides: Mapping | None = None) -> float:
    """Fraction of ``firm``'s capacity lost on ``day``; overlapping windows take the max."""
    if not 0 <= day < schedule.horizon_days:
        raise ShockError(f"day {day} outside horizon [0, {schedule.horizon_days})")
    d = 0.0
    for w in schedule.windows:
        if w.region == firm.region and w.active(day) and firm.sector in coverage_sectors(
            w.coverage, table, overrides
        ):
            d = max(d, table.rate(firm.sector))
    return d


class CompiledSchedule:
    """A schedule resolved against one network for fast per-day lookups."""

    def __init__(self, net: SupplyNetwork, schedule: LockdownSchedule, table: SectorTable,
                 overrides: Mapping | None = None):
        self.schedule = schedule
        self.firm_count = net.firm_count
        rates = table.rate_lookup(net.sectors)
        firm_rate = rates[np.searchsorted(net.sectors, net.sector)]
        self._windows = []
        for w in schedule.windows:
            covered = np.array(sorted(coverage_sectors(w.coverage, table, overrides)), dtype=np.int64)
            idx = np.flatnonzero((net.region == w.region) & np.isin(net.sector, covered))
            self._windows.append((w.start_day, w.end_day, idx, firm_rate[idx]))
        self._zero = np.zeros(self.firm_count)
        self._zero.setflags(write=False)

    def at(self, day: int) -> np.ndarray:
        active = [(idx, r) for s, e, idx, r in self._windows if s <= day < e]
        if not active:
            return self._zero
        delta = np.zeros(self.firm_count)
        for idx, r in active:
            # idx is unique within one window, so fancy-index max is safe
            delta[idx] = np.maximum(delta[idx], r)
        return delta

    def any_active(self, day: int) -> bool:
        return any(s <= day < e for s, e, _, _ in self._windows)


def firm_deltas(net: SupplyNetwork, day: int, schedule: LockdownSchedule, table: SectorTable,
                overrides: Mapping | None = None) -> np.ndarray:
    return CompiledSchedule(net, schedule, table, overrides).at(day)
