#!/usr/bin/env python3
# One antenna pair goes bad.  Alone it cries wolf; with a 5-of-9 vote it
# cannot.

from radiowin import gen_trace
from radiowin.evaluation import ablate_majority
from radiowin.presets import HALLWAY, hallway_scenario
from radiowin.synth import corrupt_pair

trace, truth, _ = gen_trace(hallway_scenario(seed=0)[0])
params = HALLWAY.resolve(12.0)
print("quorum for", trace.meta.num_pairs, "pairs:", params.quorum(trace.meta.num_pairs))

for label, t in [("clean", trace), ("pair 4 corrupted", corrupt_pair(trace, 4, 3.0))]:
    ab = ablate_majority(t, truth, params)
    fa = {j: m.false_alarms for j, m in ab.per_pair.items()}
    print(f"{label}: per-pair false alarms {fa}")
    print(f"{'':{len(label)}}  voted: {ab.voted.false_alarms} false alarms, {ab.voted.missed} missed")
