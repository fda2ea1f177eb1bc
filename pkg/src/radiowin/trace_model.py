"""Measurement data model, trace file formats and rate downsampling.

A trace holds one transmitter-receiver link.  Magnitudes live in a dense
``(frames, pairs, subcarriers)`` float array in dB; absent cells (packets
lost on some pairs) are NaN.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterator, Mapping

import numpy as np

CSV_HEADER = ["packet", "timestamp", "pair", "subcarrier", "magnitude_db"]
TRUTH_HEADER = ["time", "link_id", "direction"]
DB_DECIMALS = 4


class TraceFormatError(ValueError):
    """Malformed trace input. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateCellError(TraceFormatError):
    pass


class NonFiniteValueError(TraceFormatError):
    pass


class InvalidRateError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementSample:
    packet_index: int
    timestamp: float
    pair_id: int
    subcarrier_id: int
    magnitude_db: float


@dataclass(frozen=True)
class TraceMeta:
    link_id: str
    num_pairs: int
    num_subcarriers: int
    nominal_rate_hz: float
    spatial_index: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.num_pairs < 1 or self.num_subcarriers < 1:
            raise ValueError("num_pairs and num_subcarriers must be >= 1")
        if not (self.nominal_rate_hz > 0 and math.isfinite(self.nominal_rate_hz)):
            raise ValueError(f"nominal_rate_hz must be > 0, got {self.nominal_rate_hz}")
        index = {int(k): float(v) for k, v in self.spatial_index.items()}
        if not index:
            index = {j: float(j) for j in range(self.num_pairs)}
        if sorted(index) != list(range(self.num_pairs)):
            raise ValueError("spatial_index must have exactly one entry per pair_id in [0, num_pairs)")
        object.__setattr__(self, "spatial_index", index)

    def spatial_array(self) -> np.ndarray:
        return np.array([self.spatial_index[j] for j in range(self.num_pairs)])

    def to_dict(self) -> dict:
        return {
            "link_id": self.link_id,
            "num_pairs": self.num_pairs,
            "num_subcarriers": self.num_subcarriers,
            "nominal_rate_hz": self.nominal_rate_hz,
            "spatial_index": {str(j): d for j, d in sorted(self.spatial_index.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TraceMeta":
        try:
            return cls(
                link_id=str(d["link_id"]),
                num_pairs=int(d["num_pairs"]),
                num_subcarriers=int(d["num_subcarriers"]),
                nominal_rate_hz=float(d["nominal_rate_hz"]),
                spatial_index={int(k): float(v) for k, v in d.get("spatial_index", {}).items()},
            )
        except KeyError as exc:
            raise TraceFormatError(f"metadata missing field {exc.args[0]!r}") from None

    def with_rate(self, rate_hz: float) -> "TraceMeta":
        return TraceMeta(self.link_id, self.num_pairs, self.num_subcarriers, rate_hz, self.spatial_index)


@dataclass(frozen=True, eq=False)
class Trace:
    """Time-ordered per-packet frames of one link.

    ``magnitude[f, j, k]`` is the dB magnitude of pair ``j``, subcarrier ``k``
    in frame ``f``; NaN marks an absent cell.
    """

    meta: TraceMeta
    packets: np.ndarray
    timestamps: np.ndarray
    magnitude: np.ndarray

    def __post_init__(self):
        packets = np.asarray(self.packets, dtype=np.int64).reshape(-1)
        timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        mag = np.asarray(self.magnitude, dtype=np.float64)
        n = len(packets)
        if mag.size == 0:
            mag = mag.reshape(n, self.meta.num_pairs, self.meta.num_subcarriers)
        if mag.shape != (n, self.meta.num_pairs, self.meta.num_subcarriers):
            raise ValueError(
                f"magnitude shape {mag.shape} does not match "
                f"({n}, {self.meta.num_pairs}, {self.meta.num_subcarriers})"
            )
        if len(timestamps) != n:
            raise ValueError("timestamps and packets differ in length")
        if n and (packets[0] < 0 or np.any(np.diff(packets) <= 0)):
            raise ValueError("packet indexes must be >= 0 and strictly increasing")
        if np.any(np.diff(timestamps) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if np.any(np.isinf(mag)):
            raise ValueError("magnitudes must be finite (use NaN for absent cells)")
        for arr in (packets, timestamps, mag):
            arr.setflags(write=False)
        object.__setattr__(self, "packets", packets)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "magnitude", mag)

    def __len__(self) -> int:
        return len(self.packets)

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.magnitude)

    def samples(self) -> Iterator[MeasurementSample]:
        for f, (n, t) in enumerate(zip(self.packets, self.timestamps)):
            js, ks = np.nonzero(~np.isnan(self.magnitude[f]))
            for j, k in zip(js, ks):
                yield MeasurementSample(int(n), float(t), int(j), int(k), float(self.magnitude[f, j, k]))

    def with_magnitude(self, magnitude: np.ndarray) -> "Trace":
        return Trace(self.meta, self.packets, self.timestamps, magnitude)

    def equals(self, other: "Trace") -> bool:
        return (
            self.meta == other.meta
            and np.array_equal(self.packets, other.packets)
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.magnitude, other.magnitude, equal_nan=True)
        )


@dataclass(frozen=True)
class CrossingEvent:
    time: float
    link_id: str
    direction: int

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")


@dataclass(frozen=True)
class GroundTruth:
    events: tuple[CrossingEvent, ...] = ()

    def __post_init__(self):
        events = tuple(self.events)
        if any(b.time < a.time for a, b in zip(events, events[1:])):
            raise ValueError("ground-truth events must be sorted by time")
        object.__setattr__(self, "events", events)

    def for_link(self, link_id: str) -> "GroundTruth":
        return GroundTruth(tuple(e for e in self.events if e.link_id == link_id))

    def __len__(self) -> int:
        return len(self.events)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events], dtype=float)


# --- parsing -----------------------------------------------------------------


def _as_text(stream) -> IO[str]:
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8")


class _FrameBuilder:
    def __init__(self, meta: TraceMeta):
        self.meta = meta
        self.packets: list[int] = []
        self.timestamps: list[float] = []
        self.frames: list[np.ndarray] = []

    def cell(self, line: int, packet: int, timestamp: float, pair: int, sub: int, value: float):
        if packet < 0:
            raise TraceFormatError(f"negative packet index {packet}", line)
        if not math.isfinite(timestamp):
            raise TraceFormatError("non-finite timestamp", line)
        if not 0 <= pair < self.meta.num_pairs:
            raise TraceFormatError(f"pair {pair} outside [0, {self.meta.num_pairs})", line)
        if not 0 <= sub < self.meta.num_subcarriers:
            raise TraceFormatError(f"subcarrier {sub} outside [0, {self.meta.num_subcarriers})", line)
        if not math.isfinite(value):
            raise NonFiniteValueError(f"non-finite magnitude {value!r}", line)
        if not self.packets or packet > self.packets[-1]:
            if self.timestamps and timestamp < self.timestamps[-1]:
                raise TraceFormatError("timestamp decreases", line)
            self.packets.append(packet)
            self.timestamps.append(timestamp)
            self.frames.append(np.full((self.meta.num_pairs, self.meta.num_subcarriers), np.nan))
        elif packet < self.packets[-1]:
            raise TraceFormatError(f"packet {packet} out of order (after {self.packets[-1]})", line)
        elif timestamp != self.timestamps[-1]:
            raise TraceFormatError(f"inconsistent timestamp within packet {packet}", line)
        frame = self.frames[-1]
        if not np.isnan(frame[pair, sub]):
            raise DuplicateCellError(f"duplicate cell (packet={packet}, pair={pair}, subcarrier={sub})", line)
        frame[pair, sub] = value

    def build(self) -> Trace:
        J, N = self.meta.num_pairs, self.meta.num_subcarriers
        mag = np.stack(self.frames) if self.frames else np.empty((0, J, N))
        return Trace(self.meta, self.packets, self.timestamps, mag)


def _parse_csv(text: IO[str], meta: TraceMeta) -> Trace:
    reader = csv.reader(text)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != CSV_HEADER:
        raise TraceFormatError(f"expected header {','.join(CSV_HEADER)}", 1)
    builder = _FrameBuilder(meta)
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise TraceFormatError(f"expected 5 fields, got {len(row)}", line)
        try:
            packet, pair, sub = int(row[0]), int(row[2]), int(row[3])
            timestamp, value = float(row[1]), float(row[4])
        except ValueError as exc:
            raise TraceFormatError(str(exc), line) from None
        builder.cell(line, packet, timestamp, pair, sub, value)
    return builder.build()


def _parse_jsonl(text: IO[str], meta: TraceMeta | None) -> Trace:
    builder = None
    for line, raw in enumerate(text, start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise TraceFormatError(f"invalid JSON: {exc.msg}", line) from None
        if builder is None:
            if not isinstance(obj, dict) or "cells" in obj:
                raise TraceFormatError("first record must be the metadata object", line)
            builder = _FrameBuilder(meta or TraceMeta.from_dict(obj))
            continue
        try:
            packet, timestamp, cells = int(obj["packet"]), float(obj["timestamp"]), obj["cells"]
            parsed = [(int(c[0]), int(c[1]), float(c[2])) for c in cells]
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise TraceFormatError(f"malformed frame record: {exc}", line) from None
        if not parsed:
            raise TraceFormatError("frame record has no cells", line)
        for pair, sub, value in parsed:
            builder.cell(line, packet, timestamp, pair, sub, value)
    if builder is None:
        raise TraceFormatError("missing metadata record", 1)
    return builder.build()


def parse_trace(stream, format: str, meta: TraceMeta | None = None) -> Trace:
    """Parse a trace from bytes, text or a file object.

    CSV carries no metadata, so ``meta`` (usually loaded from the sidecar JSON)
    is required there.  JSONL embeds its metadata as the first record.
    """
    text = _as_text(stream)
    if format == "csv":
        if meta is None:
            raise TraceFormatError("CSV traces need metadata from the sidecar JSON")
        return _parse_csv(text, meta)
    if format == "jsonl":
        return _parse_jsonl(text, meta)
    raise ValueError(f"unknown trace format {format!r}")


# --- serialization -----------------------------------------------------------


def _fmt_db(x: float) -> str:
    return f"{x:.{DB_DECIMALS}f}"


def serialize_trace(trace: Trace, format: str) -> str:
    out = io.StringIO()
    if format == "csv":
        out.write(",".join(CSV_HEADER) + "\n")
        for f, (n, t) in enumerate(zip(trace.packets, trace.timestamps)):
            ts = repr(float(t))
            js, ks = np.nonzero(~np.isnan(trace.magnitude[f]))
            for j, k in zip(js, ks):
                out.write(f"{n},{ts},{j},{k},{_fmt_db(trace.magnitude[f, j, k])}\n")
    elif format == "jsonl":
        out.write(json.dumps(trace.meta.to_dict()) + "\n")
        for f, (n, t) in enumerate(zip(trace.packets, trace.timestamps)):
            js, ks = np.nonzero(~np.isnan(trace.magnitude[f]))
            if len(js) == 0:
                continue
            cells = ",".join(f"[{j},{k},{_fmt_db(trace.magnitude[f, j, k])}]" for j, k in zip(js, ks))
            out.write(f'{{"packet": {n}, "timestamp": {float(t)!r}, "cells": [{cells}]}}\n')
    else:
        raise ValueError(f"unknown trace format {format!r}")
    return out.getvalue()


def _csv_meta_path(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def write_trace(trace: Trace, path) -> None:
    """Write by suffix: ``.csv`` (plus ``.meta.json`` sidecar) or ``.jsonl``."""
    path = Path(path)
    if path.suffix == ".csv":
        path.write_text(serialize_trace(trace, "csv"), encoding="utf-8")
        _csv_meta_path(path).write_text(json.dumps(trace.meta.to_dict(), indent=2) + "\n", encoding="utf-8")
    else:
        path.write_text(serialize_trace(trace, "jsonl"), encoding="utf-8")


def read_trace(path) -> Trace:
    path = Path(path)
    if path.suffix == ".csv":
        meta = TraceMeta.from_dict(json.loads(_csv_meta_path(path).read_text(encoding="utf-8")))
        with path.open(encoding="utf-8", newline="") as fh:
            return parse_trace(fh, "csv", meta)
    with path.open(encoding="utf-8") as fh:
        return parse_trace(fh, "jsonl")


def parse_ground_truth(stream) -> GroundTruth:
    reader = csv.reader(_as_text(stream))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TRUTH_HEADER:
        raise TraceFormatError(f"expected header {','.join(TRUTH_HEADER)}", 1)
    events = []
    for row in reader:
        if not row:
            continue
        try:
            events.append(CrossingEvent(float(row[0]), row[1], int(row[2])))
        except (ValueError, IndexError) as exc:
            raise TraceFormatError(str(exc), reader.line_num) from None
    try:
        return GroundTruth(tuple(events))
    except ValueError as exc:
        raise TraceFormatError(str(exc)) from None


def serialize_ground_truth(truth: GroundTruth) -> str:
    lines = [",".join(TRUTH_HEADER)]
    lines += [f"{e.time!r},{e.link_id},{e.direction}" for e in truth.events]
    return "\n".join(lines) + "\n"


def read_ground_truth(path) -> GroundTruth:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return parse_ground_truth(fh)


def write_ground_truth(truth: GroundTruth, path) -> None:
    Path(path).write_text(serialize_ground_truth(truth), encoding="utf-8")


# --- rate handling -----------------------------------------------------------


def seconds_to_packets(seconds: float, rate_hz: float) -> int:
    """Window length in packets for a duration quoted in seconds."""
    return int(round(seconds * rate_hz))


def downsample(trace: Trace, target_rate_hz: float) -> Trace:
    """Keep every m-th frame, m = round(nominal / target).

    Packet indexes are renumbered 0..F'-1; timestamps come from kept frames.
    """
    nominal = trace.meta.nominal_rate_hz
    if not (target_rate_hz > 0) or target_rate_hz > nominal * (1 + 1e-9):
        raise InvalidRateError(f"target rate {target_rate_hz} Hz must be in (0, {nominal}] Hz")
    m = max(1, int(round(nominal / target_rate_hz)))
    if m == 1:
        return trace
    kept = slice(None, None, m)
    return Trace(
        trace.meta.with_rate(nominal / m),
        np.arange(len(trace.packets[kept])),
        trace.timestamps[kept],
        trace.magnitude[kept],
    )

