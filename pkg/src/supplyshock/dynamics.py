"""
Daily production, ordering, rationing and inventory dynamics.

Each day runs in fixed phases over all firms: orders from the previous
day's realized demand and inventory gaps; demand; capacity and input
constraints pooled by supplier sector; actual production; rationing of
short output; realized demand; inventory update. Every phase is a set of
whole-array numpy operations, so a day is a sequence of barrier-separated
sweeps with no per-firm Python loops.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping

import numpy as np

from .calibration import CalibratedNetwork
from .rationing import _waterfill_sorted, ration_literal
from .shock import CompiledSchedule, LockdownSchedule, SectorTable

__all__ = [
    "SimParams",
    "SimState",
    "DayRecord",
    "RunResult",
    "SimulationError",
    "init_state",
    "step_day",
    "iter_days",
    "simulate",
    "draw_inventory_days",
]


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimParams:
    """Model parameters for one run.

    ``mean_inventory_days`` is the Poisson mean of the per-firm target
    inventory; draws below ``min_inventory_days`` are raised to it.
    ``lagged_consumption`` consumes inputs at the previous day's production
    rate; ``ration_literal`` switches to :func:`~supplyshock.rationing.ration_literal`.
    """

    tau: float = 6.0
    mean_inventory_days: float = 10.0
    min_inventory_days: int = 4
    horizon_days: int = 120
    seed: int = 0
    ration_literal: bool = False
    lagged_consumption: bool = False
    diagnostics: bool = False

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.min_inventory_days < 1:
            raise ValueError("min_inventory_days must be >= 1")
        if self.mean_inventory_days <= 0:
            raise ValueError("mean_inventory_days must be > 0")


@dataclass
class SimState:
    """Mutable run state. ``inventory`` follows the network's link order."""

    inventory: np.ndarray
    realized_demand_prev: np.ndarray
    actual_production_prev: np.ndarray
    inventory_days: np.ndarray
    day: int = 0
    clamp_events: int = 0
    clamp_amount: float = 0.0

    def copy(self) -> "SimState":
        return replace(
            self,
            inventory=self.inventory.copy(),
            realized_demand_prev=self.realized_demand_prev.copy(),
            actual_production_prev=self.actual_production_prev.copy(),
        )


@dataclass
class DayRecord:
    day: int
    p_act: np.ndarray
    p_cap: np.ndarray | None = None
    p_max: np.ndarray | None = None
    demand: np.ndarray | None = None


@dataclass
class RunResult:
    p_act: np.ndarray
    """Actual production, shape (days, firms)."""
    final_state: SimState
    records: list[DayRecord] = field(default_factory=list)


def draw_inventory_days(firm_count: int, params: SimParams, seed: int | None = None) -> np.ndarray:
    rng = np.random.default_rng(params.seed if seed is None else seed)
    n = rng.poisson(params.mean_inventory_days, size=firm_count)
    return np.maximum(n, params.min_inventory_days).astype(np.int64)


class _Layout:
    """Static per-network arrays, links sorted by (client, supplier sector, supplier)."""

    def __init__(self, cal: CalibratedNetwork):
        net = cal.net
        n = net.firm_count
        self.n = n
        sup_sector = net.sector[net.supplier]
        self.order = np.lexsort((net.supplier, sup_sector, net.client))
        self.inverse = np.empty_like(self.order)
        self.inverse[self.order] = np.arange(len(self.order))
        self.sup = net.supplier[self.order]
        self.cli = net.client[self.order]
        self.a = net.volume[self.order]
        self.c = net.final_consumption
        self.p_ini = cal.p_ini
        # firms with no output act as steady sinks for their inputs
        self.safe_p_ini = np.where(cal.p_ini > 0, cal.p_ini, 1.0)
        self.sink = cal.p_ini <= 0

        if len(self.order):
            key_cli, key_sec = self.cli, sup_sector[self.order]
            new = np.ones(len(self.order), dtype=bool)
            new[1:] = (key_cli[1:] != key_cli[:-1]) | (key_sec[1:] != key_sec[:-1])
            self.g_start = np.flatnonzero(new)
            self.g_client = key_cli[self.g_start]
            self.a_tot = np.add.reduceat(self.a, self.g_start)
            cnew = np.ones(len(self.g_start), dtype=bool)
            cnew[1:] = self.g_client[1:] != self.g_client[:-1]
            self.c_start = np.flatnonzero(cnew)
            self.c_firms = self.g_client[self.c_start]
        else:
            self.g_start = self.g_client = self.c_start = self.c_firms = np.zeros(0, dtype=np.int64)
            self.a_tot = np.zeros(0)
        # links plus one final-consumer item per firm, grouped by seller
        x_sup = np.concatenate([self.sup, np.arange(n)])
        self.x_perm = np.lexsort((np.arange(len(x_sup)), x_sup))
        self.x_sup = x_sup[self.x_perm]
        self.x_base = np.concatenate([self.a, self.c])[self.x_perm]
        self.g_active = self.a_tot > 0
        self.g_scale = np.where(self.g_active, self.p_ini[self.g_client] / np.where(self.g_active, self.a_tot, 1.0), 0.0)

    def to_layout(self, link_values):
        return link_values[self.order]

    def from_layout(self, layout_values):
        return layout_values[self.inverse]


_LAYOUTS: "weakref.WeakKeyDictionary[CalibratedNetwork, _Layout]" = weakref.WeakKeyDictionary()


def _layout(cal: CalibratedNetwork) -> _Layout:
    lay = _LAYOUTS.get(cal)
    if lay is None:
        lay = _LAYOUTS[cal] = _Layout(cal)
    return lay


def init_state(cal: CalibratedNetwork, params: SimParams = SimParams(),
               inventory_days: np.ndarray | None = None) -> SimState:
    """Pre-shock equilibrium: inventories at target, demand at initial production."""
    n = cal.firm_count
    if inventory_days is None:
        inventory_days = draw_inventory_days(n, params)
    inventory_days = np.asarray(inventory_days, dtype=np.int64)
    inv = inventory_days[cal.net.client] * cal.net.volume
    return SimState(inv, cal.p_ini.copy(), cal.p_ini.copy(), inventory_days)


def _ration_short(lay: _Layout, short, p_act, orders, literal):
    """Realized client deliveries (layout order) and final deliveries for short sellers."""
    o_star = orders.copy()
    c_star = lay.c.copy()
    sellers = np.flatnonzero(short)
    if not len(sellers):
        return o_star, c_star
    if literal:
        by_sup = np.argsort(lay.sup, kind="stable")
        ptr = np.searchsorted(lay.sup[by_sup], np.arange(lay.n + 1))
        for i in sellers:
            links = by_sup[ptr[i]:ptr[i + 1]]
            got, fin = ration_literal(
                p_act[i], list(zip(orders[links], lay.a[links])), (lay.c[i], lay.c[i])
            )
            o_star[links] = got
            c_star[i] = fin
        return o_star, c_star
    rank = np.full(lay.n, -1, dtype=np.int64)
    rank[sellers] = np.arange(len(sellers))
    flat = np.concatenate([orders, lay.c])
    req = flat[lay.x_perm]
    on_short = short[lay.x_sup]
    idx = np.flatnonzero(on_short & (req > 0))
    grp = rank[lay.x_sup[idx]]
    rel = req[idx] / lay.x_base[idx]
    # groups are already ascending; a bounded offset sorts by rel inside each
    within = np.argsort(grp + 0.5 * (rel / (1.0 + rel)))
    idx = idx[within]
    got = _waterfill_sorted(p_act[sellers], grp[within], req[idx], lay.x_base[idx])
    flat[lay.x_perm[on_short]] = 0.0
    flat[lay.x_perm[idx]] = got
    return flat[: len(orders)], flat[len(orders):]


def _advance(lay: _Layout, inv, d_star, p_act_prev, target, delta, params: SimParams, day: int):
    """One day in place on layout-ordered ``inv``. Returns production arrays and clamp info."""
    n = lay.n
    ratio = d_star / lay.safe_p_ini
    ratio[lay.sink] = 1.0
    # (a) orders
    orders = lay.a * ratio[lay.cli] + np.maximum(0.0, target - inv) / params.tau
    # (b) demand
    demand = np.bincount(lay.sup, weights=orders, minlength=n) + lay.c
    # (c) capacity and input constraints
    p_cap = lay.p_ini * (1.0 - delta)
    p_pro = np.full(n, np.inf)
    if len(lay.g_start):
        s_tot = np.add.reduceat(inv, lay.g_start)
        g_pro = np.where(lay.g_active, s_tot * lay.g_scale, np.inf)
        p_pro[lay.c_firms] = np.minimum.reduceat(g_pro, lay.c_start)
    p_max = np.minimum(p_cap, p_pro)
    p_act = np.minimum(p_max, demand)
    bad = ~np.isfinite(p_act) | (p_act < 0)
    if bad.any():
        raise SimulationError(f"day {day}: invalid production for firm {int(np.flatnonzero(bad)[0])} (production phase)")
    # (d) rationing
    o_star, c_star = _ration_short(lay, p_act < demand, p_act, orders, params.ration_literal)
    # (e) realized demand
    d_new = np.bincount(lay.sup, weights=o_star, minlength=n) + c_star
    # (f) inventory
    used = p_act_prev if params.lagged_consumption else p_act
    util = used / lay.safe_p_ini
    util[lay.sink] = 1.0
    inv += o_star - lay.a * util[lay.cli]
    neg = inv < 0
    events, amount = 0, 0.0
    if neg.any():
        events = int(neg.sum())
        amount = float(-inv[neg].sum())
        inv[neg] = 0.0
    if not np.isfinite(inv).all():
        k = int(np.flatnonzero(~np.isfinite(inv))[0])
        raise SimulationError(f"day {day}: invalid inventory at client {int(lay.cli[k])} (inventory phase)")
    return p_act, d_new, p_cap, p_max, demand, events, amount


def step_day(state: SimState, cal: CalibratedNetwork, schedule: LockdownSchedule,
             table: SectorTable, day: int | None = None, params: SimParams = SimParams(),
             overrides: Mapping | None = None) -> tuple[SimState, DayRecord]:
    """Advance a copy of ``state`` by one day; ``day`` defaults to ``state.day``."""
    day = state.day if day is None else day
    if not 0 <= day < schedule.horizon_days:
        raise SimulationError(f"day {day} outside horizon [0, {schedule.horizon_days})")
    lay = _layout(cal)
    delta = CompiledSchedule(cal.net, schedule, table, overrides).at(day)
    new = state.copy()
    inv = lay.to_layout(new.inventory)
    target = lay.to_layout(new.inventory_days[cal.net.client] * cal.net.volume)
    p_act, d_new, p_cap, p_max, demand, ev, amt = _advance(
        lay, inv, new.realized_demand_prev, new.actual_production_prev, target, delta, params, day
    )
    new.inventory = lay.from_layout(inv)
    new.realized_demand_prev = d_new
    new.actual_production_prev = p_act
    new.day = day + 1
    new.clamp_events += ev
    new.clamp_amount += amt
    rec = DayRecord(day, p_act, p_cap, p_max, demand) if params.diagnostics else DayRecord(day, p_act)
    return new, rec


def iter_days(cal: CalibratedNetwork, schedule: LockdownSchedule | CompiledSchedule,
              table: SectorTable, params: SimParams = SimParams(),
              state: SimState | None = None, overrides: Mapping | None = None) -> Iterator[DayRecord]:
    """Run the horizon and yield one record per day.

    The state object passed in (or created from ``params``) is updated in
    place; its inventory is written back once the generator is exhausted.
    """
    lay = _layout(cal)
    compiled = schedule if isinstance(schedule, CompiledSchedule) else CompiledSchedule(
        cal.net, schedule, table, overrides
    )
    horizon = compiled.schedule.horizon_days
    st = init_state(cal, params) if state is None else state
    inv = lay.to_layout(st.inventory)
    target = lay.to_layout(st.inventory_days[cal.net.client] * cal.net.volume)
    d_star = st.realized_demand_prev.copy()
    p_prev = st.actual_production_prev.copy()
    for day in range(st.day, horizon):
        p_act, d_star, p_cap, p_max, demand, ev, amt = _advance(
            lay, inv, d_star, p_prev, target, compiled.at(day), params, day
        )
        p_prev = p_act
        st.day = day + 1
        st.clamp_events += ev
        st.clamp_amount += amt
        st.realized_demand_prev = d_star
        st.actual_production_prev = p_act
        if params.diagnostics:
            yield DayRecord(day, p_act, p_cap, p_max, demand)
        else:
            yield DayRecord(day, p_act)
    st.inventory = lay.from_layout(inv)


def simulate(cal: CalibratedNetwork, schedule: LockdownSchedule, table: SectorTable,
             params: SimParams = SimParams(), state: SimState | None = None,
             overrides: Mapping | None = None) -> RunResult:
    """Run a whole schedule and collect per-day production for every firm."""
    st = init_state(cal, params) if state is None else state
    records = list(iter_days(cal, schedule, table, params, st, overrides))
    p_act = np.array([r.p_act for r in records]) if records else np.zeros((0, cal.firm_count))
    return RunResult(p_act, st, records if params.diagnostics else [])
