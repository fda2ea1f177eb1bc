"""Streaming line-crossing detection on per-packet channel magnitudes.

Each antenna pair is watched independently: the subcarrier-averaged variance
over a short window is compared against the same statistic over a long
window, and the positive excess is accumulated over the current excursion
until it beats ``V_long + C * S_long``.  Pair detections are then combined by
majority vote and temporally close votes are merged into one crossing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .trace_model import Trace


class InsufficientDataError(ValueError):
    """Fewer than two present samples in the window."""


@dataclass(frozen=True)
class DetectorParams:
    w_s: int
    w_l: int
    C: float = 15.0
    delta_s: float = 4.0
    majority_quorum: int | None = None

    def __post_init__(self):
        if not 1 < self.w_s < self.w_l:
            raise ValueError(f"need 1 < w_s < w_l, got w_s={self.w_s}, w_l={self.w_l}")
        if not self.C > 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if not self.delta_s >= 0:
            raise ValueError(f"delta_s must be >= 0, got {self.delta_s}")
        if self.majority_quorum is not None and self.majority_quorum < 1:
            raise ValueError("majority_quorum must be >= 1")

    def quorum(self, num_pairs: int) -> int:
        """Configured quorum, or a strict majority of ``num_pairs``."""
        q = self.majority_quorum if self.majority_quorum is not None else default_quorum(num_pairs)
        if not 1 <= q <= num_pairs:
            raise ValueError(f"majority_quorum {q} outside [1, {num_pairs}]")
        return q


def default_quorum(num_pairs: int) -> int:
    # ceil((J + 1) / 2): a tie at exactly J/2 is not a majority
    return (num_pairs + 2) // 2


@dataclass(frozen=True)
class PairDetection:
    pair_id: int
    packet: int
    timestamp: float
    accumulated_excess: float
    threshold: float


@dataclass(frozen=True)
class DetectionEvent:
    link_id: str
    trigger_time: float
    packet: int
    contributing: tuple[PairDetection, ...]
    delta_s: float = 0.0

    @property
    def window(self) -> tuple[float, float]:
        return (self.trigger_time, self.trigger_time + self.delta_s)

    @property
    def votes(self) -> list[int]:
        return sorted(d.pair_id for d in self.contributing)

    def to_record(self) -> dict:
        return {
            "link_id": self.link_id,
            "trigger_time": self.trigger_time,
            "packet": self.packet,
            "votes": self.votes,
        }


# --- windowed statistics -----------------------------------------------------


def _window_values(series, w: int, n: int) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    if w < 1:
        raise ValueError("window length must be >= 1")
    if not 0 <= n < len(series):
        raise IndexError(f"packet position {n} outside series of length {len(series)}")
    x = series[max(0, n - w + 1) : n + 1]
    x = x[~np.isnan(x)]
    if len(x) < 2:
        raise InsufficientDataError(f"{len(x)} present samples in window ending at {n}")
    return x


def windowed_mean(series, w: int, n: int) -> float:
    """Mean of the present samples among the ``w`` packets ending at ``n``."""
    return float(np.mean(_window_values(series, w, n)))


def windowed_variance(series, w: int, n: int) -> float:
    """Unbiased variance (divisor = present count - 1) over the window ending at ``n``."""
    x = _window_values(series, w, n)
    return float(np.sum((x - x.mean()) ** 2) / (len(x) - 1))


def windowed_std(series, w: int, n: int) -> float:
    return math.sqrt(windowed_variance(series, w, n))


# recompute a cell exactly once its rounding-error estimate exceeds this
# fraction of its sum of squares
_RESYNC_RATIO = 1e-12
_EPS = np.finfo(float).eps


def rolling_variance(x, w: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Streaming sliding-window mean/variance along axis 0.

    Runs a Welford update that adds the newest sample and retires the one
    leaving the window, vectorised over the trailing axes.  NaN samples are
    skipped.  Each cell carries a running bound on the rounding error of its
    sum of squares; when the bound grows past a tiny fraction of that sum
    (nearly flat windows at large magnitudes), the cell is recomputed from its
    window with two passes.  Returns ``(mean, var, count)``; mean/var are NaN
    where fewer than two samples are present.
    """
    x = np.asarray(x, dtype=float)
    if w < 2:
        raise ValueError("window length must be >= 2")
    if x.ndim == 1:
        m, v, c = rolling_variance(x[:, None], w)
        return m[:, 0], v[:, 0], c[:, 0]
    shape = x.shape[1:]
    cnt = np.zeros(shape)
    mean = np.zeros(shape)
    m2 = np.zeros(shape)
    err = np.zeros(shape)
    out_mean = np.full(x.shape, np.nan)
    out_var = np.full(x.shape, np.nan)
    out_cnt = np.zeros(x.shape, dtype=np.int64)
    for i in range(len(x)):
        if i >= w:
            old = x[i - w]
            ok = ~np.isnan(old)
            if ok.any():
                cnt = cnt - ok
                d = np.where(ok, old - mean, 0.0)
                new_mean = np.where(ok, mean - d / np.maximum(cnt, 1), mean)
                m2 = m2 - np.where(ok, d * (old - new_mean), 0.0)
                err = err + np.where(ok, 8 * _EPS * (np.abs(old) + np.abs(mean)) * np.abs(d), 0.0)
                empty = cnt == 0
                mean = np.where(empty, 0.0, new_mean)
                m2 = np.where(empty, 0.0, np.maximum(m2, 0.0))
                err = np.where(empty, 0.0, err)
        new = x[i]
        ok = ~np.isnan(new)
        cnt = cnt + ok
        d = np.where(ok, new - mean, 0.0)
        mean = mean + d / np.maximum(cnt, 1)
        m2 = m2 + np.where(ok, d * (new - mean), 0.0)
        err = err + np.where(ok, 8 * _EPS * (np.abs(new) + np.abs(mean)) * np.abs(d), 0.0)
        valid = cnt >= 2
        stale = valid & (err > _RESYNC_RATIO * m2)
        if stale.any():
            win = x[max(0, i - w + 1) : i + 1][:, stale]
            mu = np.nanmean(win, axis=0)
            mean[stale] = mu
            m2[stale] = np.nansum((win - mu) ** 2, axis=0)
            err[stale] = 0.0
        out_mean[i] = np.where(valid, mean, np.nan)
        out_var[i] = np.where(valid, m2 / np.maximum(cnt - 1, 1), np.nan)
        out_cnt[i] = cnt
    return out_mean, out_var, out_cnt


def subcarrier_average(cell_var) -> tuple[np.ndarray, np.ndarray]:
    """Average per-subcarrier variance and std over the last axis.

    Returns ``(V, S)``.  ``S`` averages the per-subcarrier standard deviations,
    so in general ``S != sqrt(V)``.  Subcarriers without a valid window (NaN)
    are left out of the average; all-NaN rows give NaN.
    """
    cell_var = np.asarray(cell_var, dtype=float)
    valid = ~np.isnan(cell_var)
    n_valid = valid.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        v = np.where(valid, cell_var, 0.0).sum(axis=-1) / n_valid
        s = np.where(valid, np.sqrt(np.where(valid, cell_var, 0.0)), 0.0).sum(axis=-1) / n_valid
    v = np.where(n_valid > 0, v, np.nan)
    s = np.where(n_valid > 0, s, np.nan)
    if v.ndim == 0:
        if n_valid == 0:
            raise InsufficientDataError("no subcarrier has a valid window")
        return float(v), float(s)
    return v, s


@dataclass(frozen=True, eq=False)
class PairStatistics:
    """Per-frame, per-pair statistics, each shaped ``(frames, pairs)``."""

    v_short: np.ndarray
    v_long: np.ndarray
    s_long: np.ndarray
    warmup: int

    @property
    def excess(self) -> np.ndarray:
        return self.v_short - self.v_long

    def threshold(self, C: float) -> np.ndarray:
        return self.v_long + C * self.s_long


def pair_statistics(trace: Trace, params: DetectorParams) -> PairStatistics:
    _, var_s, _ = rolling_variance(trace.magnitude, params.w_s)
    _, var_l, _ = rolling_variance(trace.magnitude, params.w_l)
    v_s, _ = subcarrier_average(var_s)
    v_l, s_l = subcarrier_average(var_l)
    return PairStatistics(np.atleast_2d(v_s), np.atleast_2d(v_l), np.atleast_2d(s_l), warmup=params.w_l - 1)


# --- detection ---------------------------------------------------------------


def detect_pair_series(
    v_short,
    v_long,
    s_long,
    C: float,
    packets: Sequence[int],
    timestamps: Sequence[float],
    pair_id: int = 0,
    warmup: int = 0,
) -> list[PairDetection]:
    """Apply the accumulated-excess rule to one pair's statistic series.

    The excess ``V_short - V_long`` is summed over the current run of packets
    where it is positive; a detection fires at the first packet where the sum
    beats ``V_long + C * S_long`` at that packet.  One detection per run.
    Frames before ``warmup`` or with undefined statistics are skipped.
    """
    out: list[PairDetection] = []
    acc = 0.0
    armed = True
    for f in range(warmup, len(v_short)):
        vs, vl, sl = v_short[f], v_long[f], s_long[f]
        if np.isnan(vs) or np.isnan(vl) or np.isnan(sl):
            continue
        diff = vs - vl
        if diff <= 0:
            acc = 0.0
            armed = True
            continue
        acc += diff
        gamma = vl + C * sl
        if armed and acc > gamma:
            out.append(PairDetection(int(pair_id), int(packets[f]), float(timestamps[f]), float(acc), float(gamma)))
            armed = False
            acc = 0.0
    return out


def detect_pair(trace: Trace, pair_id: int, params: DetectorParams, stats: PairStatistics | None = None) -> list[PairDetection]:
    stats = stats or pair_statistics(trace, params)
    return detect_pair_series(
        stats.v_short[:, pair_id],
        stats.v_long[:, pair_id],
        stats.s_long[:, pair_id],
        params.C,
        trace.packets,
        trace.timestamps,
        pair_id=pair_id,
        warmup=stats.warmup,
    )


def detect_all_pairs(trace: Trace, params: DetectorParams, stats: PairStatistics | None = None) -> list[PairDetection]:
    stats = stats or pair_statistics(trace, params)
    dets: list[PairDetection] = []
    for j in range(trace.meta.num_pairs):
        dets.extend(detect_pair(trace, j, params, stats))
    return sorted(dets, key=lambda d: (d.packet, d.pair_id))


@dataclass
class _OpenEvent:
    trigger: PairDetection
    votes: dict[int, PairDetection] = field(default_factory=dict)

    @property
    def first_packet(self) -> int:
        return min(d.packet for d in self.votes.values())


def majority_vote(
    detections: Iterable[PairDetection],
    w_s: int,
    quorum: int,
    link_id: str = "",
    delta_s: float = 0.0,
) -> list[DetectionEvent]:
    """Declare crossings when ``quorum`` distinct pairs fire within ``w_s`` packets.

    Votes that build an event are consumed.  A pair that fires shortly after
    an event, while still within ``w_s`` packets of that event's earliest vote,
    joins the event as a late vote instead of opening a new count.
    """
    if quorum < 1:
        raise ValueError("quorum must be >= 1")
    events: list[_OpenEvent] = []
    pending: list[PairDetection] = []
    for d in sorted(detections, key=lambda d: (d.packet, d.pair_id)):
        if events:
            last = events[-1]
            if d.pair_id not in last.votes and d.packet - last.first_packet < w_s:
                last.votes[d.pair_id] = d
                continue
        pending = [p for p in pending if d.packet - p.packet < w_s]
        pending.append(d)
        earliest: dict[int, PairDetection] = {}
        for p in pending:
            earliest.setdefault(p.pair_id, p)
        if len(earliest) >= quorum:
            events.append(_OpenEvent(d, earliest))
            pending = []
    return [
        DetectionEvent(
            link_id,
            ev.trigger.timestamp,
            ev.trigger.packet,
            tuple(sorted(ev.votes.values(), key=lambda p: (p.packet, p.pair_id))),
            delta_s,
        )
        for ev in events
    ]


def merge_detections(events: Iterable[DetectionEvent], delta_s: float) -> list[DetectionEvent]:
    """Suppress events in ``(t1, t1 + delta_s]`` after each kept event ``t1``.

    Suppression anchors on kept events only, so suppressed events never extend
    the window.  Applied per link.
    """
    if delta_s < 0:
        raise ValueError("delta_s must be >= 0")
    last_kept: dict[str, float] = {}
    kept = []
    for ev in sorted(events, key=lambda e: (e.trigger_time, e.packet)):
        t1 = last_kept.get(ev.link_id)
        if t1 is not None and ev.trigger_time <= t1 + delta_s:
            continue
        last_kept[ev.link_id] = ev.trigger_time
        kept.append(ev)
    return kept


@dataclass(frozen=True, eq=False)
class DetectionRun:
    stats: PairStatistics
    pair_detections: list[PairDetection]
    voted: list[DetectionEvent]
    events: list[DetectionEvent]


def run_detector(trace: Trace, params: DetectorParams) -> DetectionRun:
    """Full per-link pipeline: statistics, pair rule, majority vote, merging."""
    stats = pair_statistics(trace, params)
    pair_dets = detect_all_pairs(trace, params, stats)
    quorum = params.quorum(trace.meta.num_pairs)
    voted = majority_vote(pair_dets, params.w_s, quorum, trace.meta.link_id, params.delta_s)
    return DetectionRun(stats, pair_dets, voted, merge_detections(voted, params.delta_s))
