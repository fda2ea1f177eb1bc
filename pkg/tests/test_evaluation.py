import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiowin.detector import DetectorParams, run_detector
from radiowin.evaluation import (
    Metrics,
    WindowSettings,
    ablate_majority,
    format_table,
    match,
    metrics_json,
    rate_sweep,
    score,
)
from radiowin.synth import ScenarioConfig, corrupt_pair, gen_trace
from radiowin.trace_model import CrossingEvent, GroundTruth, TraceMeta


def truth_at(times, link="rx"):
    return GroundTruth(tuple(CrossingEvent(t, link, 1) for t in times))


class Det:
    def __init__(self, t, direction=None):
        self.trigger_time = t
        self.direction = direction


def test_perfect_detector():
    times = [10.0, 30.0, 50.0]
    m = score(times, truth_at(times), 1000)
    assert (m.fa_rate_pct, m.md_rate_pct, m.timing_err_mean_s) == (0.0, 0.0, 0.0)


def test_silent_detector():
    m = score([], truth_at([10.0 * i for i in range(1, 11)]), 12_000)
    assert m.md_rate_pct == 100.0 and m.fa_rate_pct == 0.0
    assert m.timing_err_mean_s is None


def test_one_false_alarm_per_12000_samples():
    m = score([10.0, 500.0], truth_at([10.5]), 12_000)
    assert m.false_alarms == 1
    assert m.fa_rate_pct == pytest.approx(100 / 12_000)
    assert round(m.fa_rate_pct, 4) == 0.0083


def test_timing_and_direction():
    truth = GroundTruth((CrossingEvent(10.0, "rx", 1), CrossingEvent(20.0, "rx", -1), CrossingEvent(30.0, "rx", 1)))
    m = score([Det(10.5, 1), Det(19.0, 1), Det(31.5, 0)], truth, 600)
    assert (m.timing_err_min_s, m.timing_err_max_s) == (0.5, 1.5)
    assert m.timing_err_mean_s == pytest.approx(1.0)
    assert m.direction_accuracy_pct == 50.0  # the unknown one is left out


def test_negative_tolerance():
    with pytest.raises(ValueError):
        score([], truth_at([1.0]), 10, match_tolerance_s=-1)
    with pytest.raises(ValueError):
        match([], [], -0.1)


def test_greedy_takes_nearest():
    assert match([9.0, 11.5], [10.0, 12.0], 4.0) == [(0, 0), (1, 1)]
    assert match([10.2], [10.0, 10.3], 4.0) == [(0, 0)]


times = st.lists(st.floats(0, 600, allow_nan=False), max_size=25)


@settings(max_examples=100, deadline=None)
@given(times, times, st.floats(0, 10))
def test_matching_is_one_to_one(dets, truths, tol):
    pairs = match(dets, truths, tol)
    assert len({t for t, _ in pairs}) == len(pairs) == len({d for _, d in pairs})
    assert all(abs(dets[d] - truths[t]) <= tol for t, d in pairs)
    m = score(dets, truth_at(sorted(truths)), 7200, tol)
    assert m.matched + m.false_alarms == len(dets)
    assert m.matched + m.missed == len(truths)


@settings(max_examples=60, deadline=None)
@given(times, times, st.randoms(use_true_random=False))
def test_scores_ignore_detection_order(dets, truths, rnd):
    shuffled = list(dets)
    rnd.shuffle(shuffled)
    truth = truth_at(sorted(truths))
    assert score(dets, truth, 7200) == score(shuffled, truth, 7200)


def test_zero_tolerance_misses_almost_everything():
    m = score([10.04, 20.1], truth_at([10.0, 20.0]), 600, match_tolerance_s=0.0)
    assert m.md_rate_pct == 100.0


def test_table_and_json():
    m = score([10.0], truth_at([10.5]), 100)
    table = format_table({"hallway": m})
    assert table.splitlines()[0].split() == ["Experiment", "FA%", "MD%", "Min", "Max", "Mean"]
    assert table.splitlines()[1].split() == ["hallway", "0.0000", "0.00", "0.50", "0.50", "0.50"]
    assert '"md_rate_pct": 0.0' in metrics_json({"x": m})


# --- ablation and rate sweep -------------------------------------------------


@pytest.fixture(scope="module")
def small_link():
    meta = TraceMeta("rx", 9, 8, 12.0, {j: float(j % 3 - 1) for j in range(9)})
    crossings = [(60.0 + 25 * i, 1 if i % 2 == 0 else -1) for i in range(6)]
    cfg = ScenarioConfig(meta, 220.0, crossings=crossings, antenna_spacing_s=0.5, rng_seed=3)
    trace, truth, _ = gen_trace(cfg)
    return trace, truth


PARAMS = WindowSettings(4.0, 40.0).resolve(12.0)


def test_ablation_corrupted_pair(small_link):
    trace, truth = small_link
    bad = corrupt_pair(trace, 4, 3.0, rng_seed=1)
    ab = ablate_majority(bad, truth, PARAMS)
    assert ab.per_pair[4].false_alarms >= 1
    assert ab.voted.false_alarms == 0


def test_clean_voted_matches_best_pair(small_link):
    trace, truth = small_link
    ab = ablate_majority(trace, truth, PARAMS)
    best = min(ab.per_pair.values(), key=lambda m: (m.md_rate_pct, m.fa_rate_pct))
    assert ab.voted.md_rate_pct == best.md_rate_pct
    assert ab.voted.fa_rate_pct == best.fa_rate_pct


def test_quorum_one_unions_pairs(small_link):
    trace, truth = small_link
    p = DetectorParams(PARAMS.w_s, PARAMS.w_l, PARAMS.C, PARAMS.delta_s, majority_quorum=1)
    run = run_detector(trace, p)
    fired = {d.packet for d in run.pair_detections}
    assert run.voted
    # every event triggers at the first pair detection of its cluster
    assert {e.packet for e in run.voted} <= fired
    assert min(e.packet for e in run.voted) == min(fired)


def test_rate_sweep_nominal_equals_baseline(small_link):
    trace, truth = small_link
    settings_ = WindowSettings(4.0, 40.0)
    swept = rate_sweep(trace, truth, [12.0], settings_)
    base = score(run_detector(trace, settings_.resolve(12.0)).events, truth, len(trace))
    assert swept[12.0].md_rate_pct == base.md_rate_pct
    assert swept[12.0].fa_rate_pct == base.fa_rate_pct
    assert swept[12.0].timing_err_mean_s == base.timing_err_mean_s


def test_metrics_detection_rate():
    m = Metrics(0.0, 25.0, None, None, None, None, 10, 4, 3, 3, 0, 1)
    assert m.detection_rate_pct == 75.0
    assert m.timing_err_s == {"min": None, "max": None, "mean": None}
