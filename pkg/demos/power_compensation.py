#!/usr/bin/env python3
# What happens when the transmitter hops between power levels every packet,
# and how the median-based compensation undoes it.

import numpy as np

from radiowin import analyze, gen_trace, score
from radiowin.presets import HALLWAY, hallway_scenario
from radiowin.synth import LineCross, Random

params = HALLWAY.resolve(12.0)


def run(regime, compensate):
    gens = [gen_trace(c) for c in hallway_scenario(seed=0, tx_regime=regime)]
    traces = [g[0] for g in gens]
    res = analyze(traces, params, compensate=compensate)
    misses = sum(score(res.detections[t.meta.link_id], g[1], len(t)).missed for t, g in zip(traces, gens))
    false = sum(score(res.detections[t.meta.link_id], g[1], len(t)).false_alarms for t, g in zip(traces, gens))
    return res, gens[0][2], misses, false


for name, regime in [("normal", None), ("random", Random()), ("linecross", LineCross())]:
    for comp in (False, True):
        res, schedule, missed, false = run(regime, comp)
        tag = "compensated" if comp else "raw"
        print(f"{name:>9} {tag:>11}: missed {missed:2d}/40, false alarms {false}")

# The estimate follows the true schedule, relative to the first packet.
res, schedule, _, _ = run(Random(), True)
t_hat = np.array([e.t_hat_db for e in res.tx_estimates])
err = t_hat - (schedule - schedule[0])
print("estimator error within 2 dB on", f"{100 * np.mean(np.abs(err) <= 2):.1f}% of packets")
print("first few t_hat:", np.round(t_hat[:6], 2), "true:", schedule[:6] - schedule[0])
