"""
Ready-made calibrated economies for experiments and tests.
"""

from __future__ import annotations

import numpy as np

from .calibration import CalibratedNetwork, calibrate, random_io_table
from .network import SyntheticConfig, generate_synthetic
from .shock import SectorTable, bundled_sector_table


def region_weights(region_count: int, skew: float = 0.8) -> dict[int, float]:
    """Zipf-like weights over regions ``1..region_count`` (region 1 largest)."""
    w = np.arange(1, region_count + 1, dtype=float) ** -skew
    w /= w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return {r: float(x) for r, x in zip(range(1, region_count + 1), w)}


def synthetic_economy(firm_count: int = 10_000, link_count: int | None = None,
                      region_count: int = 10, seed: int = 0,
                      table: SectorTable | None = None,
                      intra_region_share: float = 0.3,
                      exponent: float = 2.4) -> CalibratedNetwork:
    """Generate a scale-free network over the sector table's codes and calibrate it
    against a random IO table. Four links per firm unless ``link_count`` is given."""
    table = bundled_sector_table() if table is None else table
    codes = sorted(table.codes)
    cfg = SyntheticConfig(
        firm_count=firm_count,
        link_count=4 * firm_count if link_count is None else link_count,
        region_weights=region_weights(region_count),
        sector_weights={c: 1.0 for c in codes},
        exponent=exponent,
        intra_region_share=intra_region_share,
        seed=seed,
    )
    net = generate_synthetic(cfg)
    io = random_io_table(codes, seed=seed + 1)
    return calibrate(net, io)
