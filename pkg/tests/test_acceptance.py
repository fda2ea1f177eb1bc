"""Acceptance gate: ten criteria, each printing one PASS/FAIL line.

Scenarios are the synthetic hallway and ZigBee deployments from
``radiowin.presets`` at seed 0, with the hallway window preset.
"""

import json
import math

import numpy as np
import pytest

from radiowin.cli import main
from radiowin.detector import rolling_variance, run_detector
from radiowin.evaluation import ablate_majority, rate_sweep, score
from radiowin.pipeline import analyze
from radiowin.presets import HALLWAY, hallway_scenario, zigbee_scenario
from radiowin.synth import LineCross, Random, corrupt_pair, gen_trace
from radiowin.trace_model import GroundTruth

SEED = 0
TOL = 4.0


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def generate(regime=None):
    out = [gen_trace(c) for c in hallway_scenario(seed=SEED, tx_regime=regime)]
    traces = [t for t, _, _ in out]
    truth = GroundTruth(tuple(sorted((e for _, g, _ in out for e in g.events), key=lambda e: (e.time, e.link_id))))
    return traces, truth, out[0][2]


def pooled(results, traces, truth):
    """Score every link and sum the counts into one deployment-wide metric."""
    per_link = {t.meta.link_id: score(results[t.meta.link_id], truth.for_link(t.meta.link_id), len(t), TOL) for t in traces}
    n = sum(m.n_samples for m in per_link.values())
    fa = sum(m.false_alarms for m in per_link.values())
    truths = sum(m.n_truth for m in per_link.values())
    missed = sum(m.missed for m in per_link.values())
    return per_link, 100.0 * fa / n, 100.0 * missed / truths


PARAMS = HALLWAY.resolve(12.0)


@pytest.fixture(scope="module")
def normal():
    traces, truth, sched = generate()
    return traces, truth, sched, analyze(traces, PARAMS)


@pytest.fixture(scope="module")
def random_power():
    traces, truth, sched = generate(Random())
    return traces, truth, sched


def test_c01_variance_oracle(capsys):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        w = int(rng.integers(2, 65))
        x = rng.normal(rng.uniform(-90, -20), rng.uniform(0.05, 8.0), size=w + int(rng.integers(0, 64)))
        _, var, _ = rolling_variance(x, w)
        for n in range(w - 1, len(x)):
            seg = x[n - w + 1 : n + 1].tolist()
            m = math.fsum(seg) / w
            ref = math.fsum((v - m) ** 2 for v in seg) / (w - 1)
            worst = max(worst, abs(var[n] - ref) / ref)
    report(capsys, 1, worst <= 1e-9, f"max relative error {worst:.2e} (limit 1e-9)")


def test_c02_hallway_detection(normal, capsys):
    traces, truth, _, result = normal
    per_link, fa, md = pooled(result.detections, traces, truth)
    matched = sum(m.matched for m in per_link.values())
    mean_err = sum(m.timing_err_mean_s * m.matched for m in per_link.values()) / matched
    ok = fa == 0 and md <= 5 and mean_err <= 1.5
    report(capsys, 2, ok, f"FA {fa:.4f}% MD {md:.2f}% mean timing error {mean_err:.2f} s")


def test_c03_direction(normal, capsys):
    traces, truth, _, result = normal
    per_link, _, _ = pooled(result.detections, traces, truth)
    dirs = [e.direction for e in truth.for_link("rx1").events]
    acc = [m.direction_accuracy_pct for m in per_link.values()]
    ok = dirs.count(1) == 10 and dirs.count(-1) == 10 and all(a == 100.0 for a in acc)
    report(capsys, 3, ok, f"direction accuracy per link {acc}")


def test_c04_power_change_damage(random_power, capsys):
    traces, truth, _ = random_power
    _, fa, md = pooled(analyze(traces, PARAMS).detections, traces, truth)
    report(capsys, 4, md >= 20, f"uncompensated MD {md:.2f}% (need >= 20), FA {fa:.4f}%")


def test_c05_compensation_recovery(normal, random_power, capsys):
    traces, truth, _ = random_power
    _, fa_c, md_c = pooled(analyze(traces, PARAMS, compensate=True).detections, traces, truth)
    _, fa_n, md_n = pooled(normal[3].detections, normal[0], normal[1])
    ok = abs(fa_c - fa_n) <= 2 and abs(md_c - md_n) <= 2
    report(capsys, 5, ok, f"compensated FA {fa_c:.4f}% MD {md_c:.2f}% vs normal FA {fa_n:.4f}% MD {md_n:.2f}%")


def test_c06_estimator_accuracy(random_power, capsys):
    traces, _, sched = random_power
    estimates = analyze(traces, PARAMS, compensate=True).tx_estimates
    err = np.array([e.t_hat_db for e in estimates]) - (sched - sched[0])
    share = 100.0 * np.mean(np.abs(err) <= 2.0)
    report(capsys, 6, share >= 98, f"{share:.2f}% of packets within 2 dB (need >= 98)")


def test_c07_strategic_power(normal, capsys):
    traces, truth, _ = generate(LineCross())
    raw = analyze(traces, PARAMS)
    spurious = 0
    for t in traces:
        truth_times = np.array(truth.for_link(t.meta.link_id).times)
        for d in raw.runs[t.meta.link_id].pair_detections:
            spurious += np.abs(truth_times - d.timestamp).min() > TOL
    _, fa_c, md_c = pooled(analyze(traces, PARAMS, compensate=True).detections, traces, truth)
    _, fa_n, md_n = pooled(normal[3].detections, normal[0], normal[1])
    ok = spurious >= 5 and abs(fa_c - fa_n) <= 2 and abs(md_c - md_n) <= 2
    report(
        capsys, 7, ok,
        f"{spurious} spurious pair excursions; compensated FA {fa_c:.4f}% MD {md_c:.2f}% vs FA {fa_n:.4f}% MD {md_n:.2f}%",
    )


def test_c08_majority_ablation(normal, capsys):
    trace, truth = normal[0][0], normal[1]
    bad = corrupt_pair(trace, 4, 3.0, rng_seed=SEED)
    ab = ablate_majority(bad, truth, PARAMS, TOL)
    alone, voted = ab.per_pair[4].false_alarms, ab.voted.false_alarms
    report(capsys, 8, alone >= 1 and voted == 0, f"corrupted pair alone {alone} false alarms, voted {voted}")


def test_c09_rate_sweep(capsys):
    trace, truth, _ = gen_trace(zigbee_scenario(seed=SEED)[0])
    sweep = rate_sweep(trace, truth, [12.0, 6.0, 4.0, 2.0], HALLWAY, TOL)
    rate = {r: m.detection_rate_pct for r, m in sweep.items()}
    ok = rate[12.0] >= 96 and rate[6.0] >= 96 and rate[12.0] - rate[2.0] >= 10
    report(capsys, 9, ok, "detection rate " + ", ".join(f"{r:g} Hz {v:.1f}%" for r, v in rate.items()))


def test_c10_determinism(tmp_path, capsys, monkeypatch):
    first = tmp_path / "first"
    assert main(["synth", "--preset", "zigbee", "--regime", "random", "--out", str(first)]) == 0
    outputs = {}
    for run in ("a", "b"):
        # relative paths, so recorded file names match between the two runs
        d = tmp_path / run
        d.mkdir()
        monkeypatch.chdir(d)
        assert main(["synth", "--config", str(first / "manifest.json"), "--out", "."]) == 0
        traces = ["group1.jsonl", "group2.jsonl"]
        assert main(["detect", *traces, "--compensate", "--emit-tx-estimates", "tx.csv", "--out", "dets.jsonl"]) == 0
        assert main(["eval", "dets.jsonl", "truth.csv", "--json", "metrics.json"]) == 0
        assert main(["sweep", traces[0], "--truth", "truth.csv", "--rates", "12,6,2", "--json", "sweep.json"]) == 0
        outputs[run] = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
    replayed = all((first / n).read_bytes() == outputs["a"][n] for n in ("group1.jsonl", "group2.jsonl", "truth.csv"))
    same = outputs["a"] == outputs["b"]
    detail = f"{len(outputs['a'])} outputs byte-identical across reruns: {same}; manifest replay: {replayed}"
    report(capsys, 10, same and replayed, detail)
