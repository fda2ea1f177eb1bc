"""Direction of motion from the order in which pairs fire within one crossing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .detector import DetectionEvent

UNKNOWN = 0


@dataclass(frozen=True)
class DirectionResult:
    slope: float
    direction: int
    pairs_used: int
    event: DetectionEvent | None = None

    @property
    def known(self) -> bool:
        return self.direction != UNKNOWN


def fit_line_direction(positions: Sequence[float], packets: Sequence[float]) -> tuple[float, int]:
    """Least-squares slope of packet index against spatial index, and its sign.

    Returns direction 0 (unknown) for fewer than two points, all-equal
    positions or an exactly flat fit.
    """
    d = np.asarray(positions, dtype=float)
    n = np.asarray(packets, dtype=float)
    if len(d) < 2:
        return float("nan"), UNKNOWN
    dc = d - d.mean()
    sxx = float(np.dot(dc, dc))
    if sxx == 0.0:
        return float("nan"), UNKNOWN
    slope = float(np.dot(dc, n - n.mean()) / sxx)
    return slope, int(np.sign(slope))


def fit_direction(event: DetectionEvent, spatial_index: Mapping[int, float]) -> DirectionResult:
    """Fit ``packet = a * d + b`` over the event's votes; direction is sign(a).

    A pair that voted more than once contributes its earliest detection.
    """
    earliest: dict[int, int] = {}
    for det in event.contributing:
        if det.pair_id not in earliest or det.packet < earliest[det.pair_id]:
            earliest[det.pair_id] = det.packet
    pairs = sorted(earliest)
    slope, direction = fit_line_direction([spatial_index[j] for j in pairs], [earliest[j] for j in pairs])
    return DirectionResult(slope, direction, len(pairs), event)


def fuse_receivers(events: Sequence[DetectionEvent], positions: Sequence[float]) -> DirectionResult:
    """Direction across receivers (or receiver groups): one point per receiver.

    ``positions[i]`` is the centroid spatial index of the receiver that produced
    ``events[i]``; its trigger packet is the time coordinate.
    """
    if len(events) != len(positions):
        raise ValueError("need one position per event")
    slope, direction = fit_line_direction(positions, [e.packet for e in events])
    return DirectionResult(slope, direction, len(events))
