"""
Calibrating a synthetic supply network
======================================

Generate a small scale-free network, fill in link volumes from an IO table
and look at what the calibration produced.
"""

import numpy as np

from supplyshock import SyntheticConfig, calibrate, diagnostics, generate_synthetic, random_io_table

# five sectors over two regions, four links per firm
codes = [11, 22, 33, 44, 55]
cfg = SyntheticConfig(firm_count=2000, link_count=8000, region_weights={1: 0.6, 2: 0.4},
                      sector_weights={c: 1.0 for c in codes}, intra_region_share=0.3, seed=1)
net = generate_synthetic(cfg)
d = diagnostics(net, path_sample_size=200)
print(f"{net.firm_count} firms, {net.link_count} links")
print(f"GSCC share {d.gscc_share:.3f}, mean path length {d.avg_path_length:.2f}")

# annual IO transactions; calibration turns them into daily link volumes
io = random_io_table(codes, seed=2)
cal = calibrate(net, io)

s = np.searchsorted(codes, cal.net.sector)
flows = np.zeros((5, 5))
np.add.at(flows, (s[cal.net.supplier], s[cal.net.client]), cal.net.volume * 365)
print("largest relative gap between network and IO pair totals:",
      f"{np.max(np.abs(flows / io.transactions - 1)):.2e}")

# initial production is outgoing volume plus final consumption
print(f"total daily output {cal.p_ini.sum():.4g}, of which final demand {cal.net.final_consumption.sum():.4g}")
top = np.argsort(cal.p_ini)[::-1][:5]
for i in top:
    print(f"  firm {i}: sector {cal.net.sector[i]}, region {cal.net.region[i]}, P_ini {cal.p_ini[i]:.4g}")
