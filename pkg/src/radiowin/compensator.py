"""Transmit-power change estimation and compensation.

A power change at the transmitter shifts every pair and subcarrier of every
receiver by the same amount, while a person crossing one link line disturbs
only some cells.  The per-packet shift is therefore estimated as the median of
the differences to a reference frame, pooled over every cell of every link
that hears the transmitter, and subtracted from the measurements.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .trace_model import Trace

DEFAULT_REFRESH_S = 60.0
SHORT_TRACE_S = 600.0


class EmptyDifferenceError(ValueError):
    """No cell is present in both the frame and the reference."""


@dataclass(frozen=True, eq=False)
class ReferenceFrame:
    reference: np.ndarray
    reference_packet: int = 0
    refresh_period_packets: int | None = None

    def __post_init__(self):
        if self.refresh_period_packets is not None and self.refresh_period_packets < 1:
            raise ValueError("refresh_period_packets must be >= 1 or None")
        ref = np.array(self.reference, dtype=float)
        ref.setflags(write=False)
        object.__setattr__(self, "reference", ref)


@dataclass(frozen=True)
class TxEstimate:
    packet_index: int
    t_hat_db: float
    sample_count: int


def rss_difference(frame, reference: ReferenceFrame | np.ndarray) -> np.ndarray:
    """Cellwise ``frame - reference`` in dB; NaN wherever either side is absent."""
    ref = reference.reference if isinstance(reference, ReferenceFrame) else np.asarray(reference, dtype=float)
    h = np.asarray(frame, dtype=float) - ref
    if np.all(np.isnan(h)):
        raise EmptyDifferenceError("frame and reference share no present cell")
    return h


def estimate_tx_change(h, packet_index: int = 0) -> TxEstimate:
    """Median of all present differences (midpoint of the central pair for even counts)."""
    h = np.asarray(h, dtype=float).ravel()
    vals = h[~np.isnan(h)]
    if len(vals) == 0:
        raise EmptyDifferenceError("no differences to estimate from")
    return TxEstimate(int(packet_index), float(np.median(vals)), len(vals))


def compensate(frame, t_hat: float) -> np.ndarray:
    if not np.isfinite(t_hat):
        raise ValueError("t_hat must be finite")
    return np.asarray(frame, dtype=float) - t_hat


def refresh_reference(state: ReferenceFrame, compensated_frame, packet_index: int) -> ReferenceFrame:
    """Adopt a compensated frame as the new reference.

    Using the compensated (not raw) frame carries the running power offset
    over, so later estimates stay relative to the original reference.
    """
    return ReferenceFrame(np.asarray(compensated_frame, dtype=float), int(packet_index), state.refresh_period_packets)


class Compensator:
    """Sequential per-transmitter stream transformer.

    The first frame seen becomes the reference.  With ``refresh_period_packets``
    set, the reference is replaced every that many packets.
    """

    def __init__(self, refresh_period_packets: int | None = None):
        if refresh_period_packets is not None and refresh_period_packets < 1:
            raise ValueError("refresh_period_packets must be >= 1 or None")
        self.refresh_period_packets = refresh_period_packets
        self.state: ReferenceFrame | None = None

    def process(self, packet_index: int, frame) -> tuple[np.ndarray, TxEstimate]:
        frame = np.asarray(frame, dtype=float)
        if self.state is None:
            self.state = ReferenceFrame(frame, int(packet_index), self.refresh_period_packets)
        est = estimate_tx_change(rss_difference(frame, self.state), packet_index)
        out = compensate(frame, est.t_hat_db)
        period = self.refresh_period_packets
        if period is not None and packet_index - self.state.reference_packet >= period:
            self.state = refresh_reference(self.state, out, packet_index)
        return out, est


def default_refresh_period(trace: Trace) -> int | None:
    """No refresh for traces up to ten minutes, otherwise once a minute."""
    if len(trace) == 0:
        return None
    duration = trace.timestamps[-1] - trace.timestamps[0]
    if duration <= SHORT_TRACE_S:
        return None
    return max(1, int(round(DEFAULT_REFRESH_S * trace.meta.nominal_rate_hz)))


def compensate_traces(
    traces: Sequence[Trace], refresh_period_packets: int | None = None
) -> tuple[list[Trace], list[TxEstimate]]:
    """Compensate links that hear the same transmitter, pooling all their cells.

    All traces must carry the same packet indexes (one frame per transmitted
    packet).  A frame where no cell overlaps the reference is passed through
    unchanged with a zero estimate and ``sample_count`` 0.
    """
    traces = list(traces)
    if not traces:
        return [], []
    packets = traces[0].packets
    for t in traces[1:]:
        if not np.array_equal(t.packets, packets):
            raise ValueError("pooled traces must share packet indexes")
    sizes = [t.meta.num_pairs * t.meta.num_subcarriers for t in traces]
    pooled = np.concatenate([t.magnitude.reshape(len(t), -1) for t in traces], axis=1)
    comp = Compensator(refresh_period_packets)
    out = np.empty_like(pooled)
    estimates = []
    for f, n in enumerate(packets):
        try:
            out[f], est = comp.process(int(n), pooled[f])
        except EmptyDifferenceError:
            out[f], est = pooled[f], TxEstimate(int(n), 0.0, 0)
        estimates.append(est)
    result = []
    start = 0
    for t, size in zip(traces, sizes):
        block = out[:, start : start + size].reshape(t.magnitude.shape)
        result.append(t.with_magnitude(block))
        start += size
    return result, estimates


def compensate_trace(trace: Trace, refresh_period_packets: int | None = None) -> tuple[Trace, list[TxEstimate]]:
    (out,), estimates = compensate_traces([trace], refresh_period_packets)
    return out, estimates
