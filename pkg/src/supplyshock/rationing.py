"""
Rationing of scarce output across clients and final consumers.

Buyers are served in ascending order of their order relative to their
pre-shock baseline. Whoever asks for relatively little is served in full;
the rest receive a common share ``lam`` of their baseline, so each buyer
ends up with ``min(order, lam * baseline)`` and the total equals the
available output.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

__all__ = ["ration", "ration_literal", "waterfill"]


def _fix_residual(realized, orders, capacity, candidates):
    # Partially served buyers, largest first, each take capacity minus everyone
    # else (rounded once). Smaller buyers have finer ulps, so the sum usually
    # lands exactly on capacity; with one rationed buyer it may stay 1 ulp off.
    for k in sorted(candidates, key=lambda j: (-realized[j], j)):
        if math.fsum(realized) == capacity:
            return
        rest = math.fsum([capacity] + [-x for j, x in enumerate(realized) if j != k])
        realized[k] = min(orders[k], max(0.0, rest))


def ration(capacity: float, client_orders: Sequence[tuple[float, float]],
           final_order: tuple[float, float] = (0.0, 0.0)):
    """Allocate ``capacity`` over client orders and one final-consumer order.

    Parameters
    ----------
    capacity : float
        Output available for delivery (``r``).
    client_orders : sequence of (order, baseline)
        Current order and pre-shock daily volume of each client.
    final_order : (order, baseline)
        Same for the final consumer.

    Returns
    -------
    (list of float, float)
        Realized deliveries to each client and to the final consumer.
    """
    items = [(float(o), float(a)) for o, a in client_orders] + [tuple(map(float, final_order))]
    if capacity < 0 or any(o < 0 or a < 0 for o, a in items):
        raise ValueError("capacity, orders and baselines must be >= 0")
    orders = [o for o, _ in items]
    total = math.fsum(orders)
    if capacity >= total:
        return orders[:-1], orders[-1]

    realized = [0.0] * len(items)
    active = [k for k, (o, _) in enumerate(items) if o > 0]
    for k in active:
        # an order with zero baseline cannot arise from the order rule
        assert items[k][1] > 0, "positive order against zero baseline"
    rel = {k: items[k][0] / items[k][1] for k in active}
    remaining = float(capacity)
    level = 0.0
    while active:
        rel_min = min(rel[k] for k in active)
        base = math.fsum(items[k][1] for k in active)
        step = (rel_min - level) * base
        if remaining <= step:
            level += remaining / base
            for k in active:
                realized[k] = min(items[k][0], level * items[k][1])
            break
        remaining -= step
        level = rel_min
        done = [k for k in active if rel[k] == rel_min]
        for k in done:
            realized[k] = items[k][0]
        active = [k for k in active if rel[k] != rel_min]
    _fix_residual(realized, orders, float(capacity), active)
    return realized[:-1], realized[-1]


def ration_literal(capacity: float, client_orders: Sequence[tuple[float, float]],
                   final_order: tuple[float, float] = (0.0, 0.0)):
    """Rationing loop with multipliers applied to current orders.

    Kept for comparison with :func:`ration`. The running multiplier adds
    the full minimum relative order each round, so deliveries can exceed
    orders and some capacity may stay unallocated.
    """
    items = [(float(o), float(a)) for o, a in client_orders] + [tuple(map(float, final_order))]
    orders = [o for o, _ in items]
    if capacity >= math.fsum(orders):
        return orders[:-1], orders[-1]
    realized = [0.0] * len(items)
    sub = [0.0] * len(items)
    active = [k for k, (o, a) in enumerate(items) if o > 0 and a > 0]
    remaining = float(capacity)
    while active and remaining > 0:
        rel = {k: items[k][0] / items[k][1] for k in active}
        rel_min = min(rel.values())
        base = math.fsum(items[k][0] for k in active)
        step = rel_min * base
        if remaining <= step:
            rea = remaining / base
            for k in active:
                realized[k] = (rea + sub[k]) * items[k][0]
            remaining = 0.0
            break
        for k in active:
            sub[k] += rel_min
        remaining -= step
        gone = min(active, key=lambda k: (rel[k], k))
        realized[gone] = sub[gone] * items[gone][0]
        active.remove(gone)
    return realized[:-1], realized[-1]


def waterfill(capacity, group, orders, baseline):
    """Vectorised rationing for many sellers at once.

    ``group[k]`` names the seller of item ``k``; ``capacity[g]`` is seller
    ``g``'s output. Every seller passed here must be short, i.e. its
    capacity must be below its total orders. Items need a positive
    baseline. Returns the realized delivery per item.
    """
    capacity = np.asarray(capacity, dtype=float)
    orders = np.asarray(orders, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    group = np.asarray(group, dtype=np.int64)
    if len(orders) == 0:
        return np.zeros(0)
    rel = orders / baseline
    # sort by (group, rel); an integer key is much faster than lexsort
    by_rel = np.argsort(rel)
    rank = np.empty(len(rel), dtype=np.int64)
    rank[by_rel] = np.arange(len(rel))
    order = np.argsort(group * len(rel) + rank)
    served = _waterfill_sorted(capacity, group[order], orders[order], baseline[order])
    out = np.empty_like(served)
    out[order] = served
    return out


def _waterfill_sorted(capacity, g, o, a):
    # items sorted by (group, o / a); every group nonempty
    n_groups = len(capacity)
    rho = o / a
    counts = np.bincount(g, minlength=n_groups)
    starts = np.zeros(n_groups, dtype=np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    cs_o = np.cumsum(o)
    cs_a = np.cumsum(a)
    head_o = (cs_o - o)[np.minimum(starts, len(o) - 1)]
    head_a = (cs_a - a)[np.minimum(starts, len(o) - 1)]
    excl_o = (cs_o - o) - head_o[g]
    excl_a = (cs_a - a) - head_a[g]
    tot_a = np.bincount(g, weights=a, minlength=n_groups)

    # served total if the level were raised to this item's relative order
    level_total = excl_o + rho * (tot_a[g] - excl_a)
    below = level_total < capacity[g]
    pivot = starts + np.bincount(g, weights=below, minlength=n_groups).astype(np.int64)
    pivot = np.minimum(pivot, starts + counts - 1)
    lam = (capacity - excl_o[pivot]) / (tot_a - excl_a[pivot])

    # Newton polish on the piecewise-linear served total
    for _ in range(2):
        cap = lam[g] * a
        served = np.minimum(o, cap)
        got = np.bincount(g, weights=served, minlength=n_groups)
        free = np.bincount(g, weights=a * (cap < o), minlength=n_groups)
        ok = free > 0
        lam[ok] += (capacity[ok] - got[ok]) / free[ok]
    served = np.minimum(o, lam[g] * a)
    got = np.bincount(g, weights=served, minlength=n_groups)
    served[pivot] = np.clip(served[pivot] + (capacity - got), 0.0, o[pivot])
    return served
