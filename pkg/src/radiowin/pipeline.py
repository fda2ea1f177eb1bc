"""End-to-end analysis of the links that hear one transmitter."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .compensator import TxEstimate, compensate_traces
from .detector import DetectionEvent, DetectionRun, DetectorParams, run_detector
from .direction import DirectionResult, fit_direction
from .trace_model import Trace


@dataclass(frozen=True)
class Detection:
    event: DetectionEvent
    fit: DirectionResult

    @property
    def trigger_time(self) -> float:
        return self.event.trigger_time

    @property
    def direction(self) -> int:
        return self.fit.direction

    def to_record(self) -> dict:
        rec = self.event.to_record()
        rec["direction"] = self.fit.direction if self.fit.known else None
        rec["slope"] = None if self.fit.slope != self.fit.slope else self.fit.slope
        return rec


@dataclass(eq=False)
class Analysis:
    detections: dict[str, list[Detection]] = field(default_factory=dict)
    runs: dict[str, DetectionRun] = field(default_factory=dict)
    tx_estimates: list[TxEstimate] | None = None
    compensated: list[Trace] | None = None

    def all_detections(self) -> list[Detection]:
        out = [d for dets in self.detections.values() for d in dets]
        return sorted(out, key=lambda d: (d.trigger_time, d.event.link_id))


def analyze(
    traces: Sequence[Trace],
    params: DetectorParams,
    compensate: bool = False,
    refresh_period_packets: int | None = None,
) -> Analysis:
    """Detect crossings (with direction) on every link.

    With ``compensate`` the traces are treated as hearing the same transmitter:
    their cells are pooled for the power-change estimate before detection.
    """
    traces = list(traces)
    result = Analysis()
    if compensate:
        traces, result.tx_estimates = compensate_traces(traces, refresh_period_packets)
        result.compensated = traces
    for trace in traces:
        run = run_detector(trace, params)
        result.runs[trace.meta.link_id] = run
        result.detections[trace.meta.link_id] = [
            Detection(ev, fit_direction(ev, trace.meta.spatial_index)) for ev in run.events
        ]
    return result
