"""
Scenario families: single-region, region pairs, and nationwide restrictions.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .shock import CoverageLevel, LockdownSchedule, RestrictionWindow

__all__ = [
    "Family",
    "ScenarioSpec",
    "PairScenario",
    "single_region_set",
    "single_label",
    "pair_region_set",
    "nationwide_set",
    "load_scenario_spec",
]

DAYS_PER_WEEK = 7
DAYS_PER_MONTH = 30


class Family(str, enum.Enum):
    SINGLE = "SingleRegion"
    PAIR = "PairRegion"
    NATIONWIDE = "Nationwide"


@dataclass
class ScenarioSpec:
    family: Family = Family.SINGLE
    durations: Sequence[int] = (1, 2, 3, 4)
    """Restriction lengths in weeks."""
    coverage_levels: Sequence[CoverageLevel] = tuple(CoverageLevel)
    mc_runs: int = 30
    asynchronous_gap_days: int = 0
    window_months: int = 3
    recovery_days: int = 60
    seed: int = 0

    def __post_init__(self):
        self.family = Family(self.family)
        self.durations = tuple(int(d) for d in self.durations)
        self.coverage_levels = tuple(CoverageLevel(c) for c in self.coverage_levels)
        if self.mc_runs < 1:
            raise ValueError("mc_runs must be >= 1")
        if not self.durations or min(self.durations) < 1:
            raise ValueError("durations must be positive week counts")
        if self.asynchronous_gap_days < 0:
            raise ValueError("asynchronous_gap_days must be >= 0")
        if self.recovery_days < 0:
            raise ValueError("recovery_days must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        d["durations"] = list(self.durations)
        d["coverage_levels"] = [c.value for c in self.coverage_levels]
        return d


def load_scenario_spec(path) -> ScenarioSpec:
    with Path(path).open(encoding="utf-8") as f:
        return ScenarioSpec(**json.load(f))


def single_label(region: int, level, weeks: int) -> str:
    return f"single/r{region}/{CoverageLevel(level).value}/w{weeks}"


def single_schedule(region: int, level, weeks: int, recovery_days: int) -> LockdownSchedule:
    days = DAYS_PER_WEEK * weeks
    return LockdownSchedule((RestrictionWindow(region, 0, days, CoverageLevel(level)),), days + recovery_days)


def single_region_set(regions: Sequence[int], spec: ScenarioSpec) -> list[tuple[str, LockdownSchedule]]:
    """One schedule per (region, coverage level, duration), each starting on day 0."""
    if not regions:
        raise ValueError("regions must be nonempty")
    return [
        (single_label(r, level, w), single_schedule(r, level, w, spec.recovery_days))
        for r in regions
        for level in spec.coverage_levels
        for w in spec.durations
    ]


@dataclass(frozen=True)
class PairScenario:
    label: str
    regions: tuple[int, int]
    weeks: int
    concurrent: LockdownSchedule
    async_parts: tuple[tuple[str, LockdownSchedule], tuple[str, LockdownSchedule]]
    staggered: LockdownSchedule
    """Both windows in one run, the second starting ``asynchronous_gap_days`` after the first ends."""


def pair_region_set(regions: Sequence[int], spec: ScenarioSpec) -> list[PairScenario]:
    """Every unordered region pair, all sectors restricted.

    The concurrent schedule restricts both regions from day 0. The
    asynchronous counterpart is the two single-region schedules, simulated
    independently and summed downstream.
    """
    if len(regions) < 2:
        raise ValueError("need at least two regions")
    out = []
    for w in spec.durations:
        days = DAYS_PER_WEEK * w
        for a, b in combinations(regions, 2):
            conc = LockdownSchedule(
                (RestrictionWindow(a, 0, days, CoverageLevel.L4),
                 RestrictionWindow(b, 0, days, CoverageLevel.L4)),
                days + spec.recovery_days,
            )
            parts = tuple(
                (single_label(r, CoverageLevel.L4, w), single_schedule(r, CoverageLevel.L4, w, spec.recovery_days))
                for r in (a, b)
            )
            second = days + spec.asynchronous_gap_days
            stag = LockdownSchedule(
                (RestrictionWindow(a, 0, days, CoverageLevel.L4),
                 RestrictionWindow(b, second, days, CoverageLevel.L4)),
                second + days + spec.recovery_days,
            )
            out.append(PairScenario(f"pair/r{a}-r{b}/w{w}", (a, b), w, conc, parts, stag))
    return out


def nationwide_set(regions: Sequence[int], spec: ScenarioSpec, samples: int | None = None,
                   seed: int | None = None, weeks: int = 4):
    """Concurrent nationwide schedule plus randomized asynchronous samples.

    Each asynchronous sample draws every region's start uniformly over the
    integer days that keep the window inside ``window_months``; if no
    region drew day 0, one region chosen uniformly is moved to day 0.
    Returns ``(concurrent, [(label, schedule), ...])``.
    """
    days = DAYS_PER_WEEK * weeks
    span = DAYS_PER_MONTH * spec.window_months
    if span < days:
        raise ValueError("window_months too short for the restriction duration")
    horizon = span + spec.recovery_days
    samples = spec.mc_runs if samples is None else samples
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    regions = list(regions)
    concurrent = LockdownSchedule(
        tuple(RestrictionWindow(r, 0, days, CoverageLevel.L4) for r in regions), horizon
    )
    out = []
    for k in range(samples):
        starts = rng.integers(0, span - days + 1, size=len(regions))
        if not (starts == 0).any():
            starts[rng.integers(len(regions))] = 0
        sched = LockdownSchedule(
            tuple(RestrictionWindow(r, int(s), days, CoverageLevel.L4) for r, s in zip(regions, starts)),
            horizon,
        )
        out.append((f"nationwide/async/{k}", sched))
    return concurrent, out
