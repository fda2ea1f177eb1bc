"""Scoring detections against ground truth.

Rates follow the attack literature's convention: the false-alarm rate is
false detections per *sample point* (packet), not per crossing, so FA% values
are tiny; the missed-detection rate is per true crossing.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detector import DetectionEvent, DetectorParams, merge_detections, run_detector
from .pipeline import analyze
from .trace_model import GroundTruth, Trace, downsample, seconds_to_packets

DEFAULT_TOLERANCE_S = 4.0


@dataclass(frozen=True)
class Metrics:
    fa_rate_pct: float
    md_rate_pct: float
    timing_err_min_s: float | None
    timing_err_max_s: float | None
    timing_err_mean_s: float | None
    direction_accuracy_pct: float | None
    n_samples: int
    n_truth: int
    n_detected: int
    matched: int
    false_alarms: int
    missed: int

    @property
    def detection_rate_pct(self) -> float:
        return 100.0 - self.md_rate_pct

    @property
    def timing_err_s(self) -> dict:
        return {"min": self.timing_err_min_s, "max": self.timing_err_max_s, "mean": self.timing_err_mean_s}

    def to_dict(self) -> dict:
        return asdict(self)


def _time_of(det) -> float:
    return float(det) if isinstance(det, (int, float, np.floating)) else float(det.trigger_time)


def _direction_of(det) -> int | None:
    d = getattr(det, "direction", None)
    return int(d) if d in (1, -1) else None


def match(detection_times: Sequence[float], truth_times: Sequence[float], tolerance_s: float) -> list[tuple[int, int]]:
    """Greedy one-to-one matching in truth order.

    Each truth event takes the nearest still-unmatched detection within
    ``tolerance_s`` (earlier detection on ties).  Returns (truth, detection)
    index pairs.
    """
    if tolerance_s < 0:
        raise ValueError("match tolerance must be >= 0")
    det = np.asarray(detection_times, dtype=float)
    used = np.zeros(len(det), dtype=bool)
    pairs = []
    for i in np.argsort(truth_times, kind="stable"):
        if len(det) == 0:
            break
        gap = np.abs(det - truth_times[i])
        gap[used] = np.inf
        order = np.lexsort((det, gap))
        best = order[0]
        if gap[best] <= tolerance_s:
            used[best] = True
            pairs.append((int(i), int(best)))
    return pairs


def score(
    detections: Iterable,
    truth: GroundTruth,
    n_samples: int,
    match_tolerance_s: float = DEFAULT_TOLERANCE_S,
) -> Metrics:
    """Score detections (times or objects with ``trigger_time``) for one link."""
    if match_tolerance_s < 0:
        raise ValueError("match tolerance must be >= 0")
    dets = sorted(detections, key=_time_of)
    det_times = [_time_of(d) for d in dets]
    truth_times = truth.times
    pairs = match(det_times, truth_times, match_tolerance_s)
    matched = len(pairs)
    fa = len(dets) - matched
    missed = len(truth_times) - matched
    errs = np.array([abs(det_times[di] - truth_times[ti]) for ti, di in pairs])
    correct = total = 0
    for ti, di in pairs:
        d = _direction_of(dets[di])
        if d is not None:
            total += 1
            correct += d == truth.events[ti].direction
    return Metrics(
        fa_rate_pct=100.0 * fa / n_samples if n_samples else 0.0,
        md_rate_pct=100.0 * missed / len(truth_times) if len(truth_times) else 0.0,
        timing_err_min_s=float(errs.min()) if matched else None,
        timing_err_max_s=float(errs.max()) if matched else None,
        timing_err_mean_s=float(errs.mean()) if matched else None,
        direction_accuracy_pct=100.0 * correct / total if total else None,
        n_samples=int(n_samples),
        n_truth=len(truth_times),
        n_detected=len(dets),
        matched=matched,
        false_alarms=fa,
        missed=missed,
    )


@dataclass(frozen=True)
class Ablation:
    per_pair: dict[int, Metrics]
    voted: Metrics


def ablate_majority(
    trace: Trace,
    truth: GroundTruth,
    params: DetectorParams,
    match_tolerance_s: float = DEFAULT_TOLERANCE_S,
) -> Ablation:
    """Score each pair's own detections against the majority-voted pipeline.

    Per-pair detections get the same Δ-merging as voted events.
    """
    run = run_detector(trace, params)
    truth = truth.for_link(trace.meta.link_id)
    per_pair = {}
    for j in range(trace.meta.num_pairs):
        single = [
            DetectionEvent(trace.meta.link_id, d.timestamp, d.packet, (d,), params.delta_s)
            for d in run.pair_detections
            if d.pair_id == j
        ]
        per_pair[j] = score(merge_detections(single, params.delta_s), truth, len(trace), match_tolerance_s)
    return Ablation(per_pair, score(run.events, truth, len(trace), match_tolerance_s))


@dataclass(frozen=True)
class WindowSettings:
    """Detector windows in seconds, resolved to packets per transmission rate."""

    ws_s: float
    wl_s: float
    delta_s: float = 4.0
    C: float = 15.0
    majority_quorum: int | None = None

    def resolve(self, rate_hz: float) -> DetectorParams:
        return DetectorParams(
            w_s=seconds_to_packets(self.ws_s, rate_hz),
            w_l=seconds_to_packets(self.wl_s, rate_hz),
            C=self.C,
            delta_s=self.delta_s,
            majority_quorum=self.majority_quorum,
        )


def rate_sweep(
    traces: Trace | Sequence[Trace],
    truth: GroundTruth,
    rates: Sequence[float],
    settings: WindowSettings,
    match_tolerance_s: float = DEFAULT_TOLERANCE_S,
    compensate: bool = False,
) -> dict[float, Metrics]:
    """Downsample to each rate, re-derive windows from seconds, rerun and score.

    Scores the first trace's link; other traces only feed the compensator pool.
    """
    traces = [traces] if isinstance(traces, Trace) else list(traces)
    out = {}
    for rate in rates:
        lowered = [downsample(t, rate) for t in traces]
        params = settings.resolve(lowered[0].meta.nominal_rate_hz)
        result = analyze(lowered, params, compensate=compensate)
        link = lowered[0].meta.link_id
        out[rate] = score(result.detections[link], truth.for_link(link), len(lowered[0]), match_tolerance_s)
    return out


TABLE_COLUMNS = ("FA%", "MD%", "Min", "Max", "Mean")


def _cell(x: float | None, digits: int) -> str:
    return "-" if x is None else f"{x:.{digits}f}"


def format_table(rows: Mapping[str, Metrics]) -> str:
    """Aligned plain-text table with columns ``FA% MD% Min Max Mean``."""
    label_w = max([len("Experiment")] + [len(k) for k in rows])
    header = f"{'Experiment':<{label_w}}  " + "  ".join(f"{c:>8}" for c in TABLE_COLUMNS)
    lines = [header]
    for name, m in rows.items():
        vals = [
            _cell(m.fa_rate_pct, 4),
            _cell(m.md_rate_pct, 2),
            _cell(m.timing_err_min_s, 2),
            _cell(m.timing_err_max_s, 2),
            _cell(m.timing_err_mean_s, 2),
        ]
        lines.append(f"{name:<{label_w}}  " + "  ".join(f"{v:>8}" for v in vals))
    return "\n".join(lines) + "\n"


def metrics_json(rows: Mapping[str, Metrics]) -> str:
    return json.dumps({k: m.to_dict() for k, m in rows.items()}, indent=2, sort_keys=True) + "\n"
