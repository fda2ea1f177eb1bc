#!/usr/bin/env python3
# Fewer packets per second means fewer samples per window.  Windows stay
# fixed in seconds, so at 2 Hz the short window holds only 8 packets.

from radiowin import gen_trace
from radiowin.evaluation import format_table, rate_sweep
from radiowin.presets import HALLWAY, HOUSE, zigbee_scenario

trace, truth, _ = gen_trace(zigbee_scenario(seed=0)[0])
print("ZigBee group:", trace.meta.num_pairs, "receivers, one RSS value each")

for name, windows in [("hallway windows", HALLWAY), ("house windows", HOUSE)]:
    rows = rate_sweep(trace, truth, [12.0, 6.0, 4.0, 2.0], windows)
    print(name)
    print(format_table({f"{r:g} Hz": m for r, m in rows.items()}))
