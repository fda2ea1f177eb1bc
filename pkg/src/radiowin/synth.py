"""Synthetic link traces with ground truth.

Received magnitude per cell is

    H[n, j, k] = T_x(n) - baseline_loss[j, k] - dip_j(t_n) + noise

where ``dip_j`` is a raised-cosine attenuation centred on the time the walker
crosses pair ``j`` (pairs are hit in spatial order) and ``T_x`` follows one of
three transmit-power regimes.  Random streams are keyed on the seed so that
links generated with the same seed and regime share one power schedule while
keeping independent noise.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .trace_model import CrossingEvent, GroundTruth, Trace, TraceMeta

ZIGBEE_LEVELS_DBM = (4.5, -1.5, -6.0, -10.0)


@dataclass(frozen=True)
class Normal:
    kind = "normal"

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class LineCross:
    """Crossing-shaped power dips spaced uniformly in [period_min_s, period_max_s]."""

    period_min_s: float = 3.0
    period_max_s: float = 10.0
    depth_db: float = 5.0
    width_s: float = 2.0
    kind = "linecross"

    def __post_init__(self):
        if not 0 < self.period_min_s <= self.period_max_s:
            raise ValueError("LineCross needs 0 < period_min_s <= period_max_s")
        if not (self.depth_db > 0 and self.width_s > 0):
            raise ValueError("LineCross depth_db and width_s must be > 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "period_min_s": self.period_min_s,
            "period_max_s": self.period_max_s,
            "depth_db": self.depth_db,
            "width_s": self.width_s,
        }


@dataclass(frozen=True)
class Random:
    """Per-packet power drawn uniformly from ``levels_db``."""

    levels_db: tuple[float, ...] = ZIGBEE_LEVELS_DBM
    kind = "random"

    def __post_init__(self):
        object.__setattr__(self, "levels_db", tuple(float(x) for x in self.levels_db))
        if not self.levels_db:
            raise ValueError("Random regime needs at least one power level")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels_db": list(self.levels_db)}


TxRegime = Union[Normal, LineCross, Random]


def regime_from_dict(d: Mapping | None) -> TxRegime:
    if d is None:
        return Normal()
    kind = d.get("kind", "normal").lower()
    args = {k: v for k, v in d.items() if k != "kind"}
    if kind == "normal":
        return Normal()
    if kind == "linecross":
        return LineCross(**args)
    if kind == "random":
        return Random(**args)
    raise ValueError(f"unknown tx regime {kind!r}")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    meta: TraceMeta
    duration_s: float
    baseline_loss_db: np.ndarray | float = 60.0
    antenna_spacing_s: float = 0.0
    crossings: Sequence[tuple[float, int]] = ()
    dip_depth_db: float = 5.0
    dip_width_s: float = 2.0
    noise_std_db: float = 0.67
    tx_regime: TxRegime = field(default_factory=Normal)
    rng_seed: int = 0

    def __post_init__(self):
        J, N = self.meta.num_pairs, self.meta.num_subcarriers
        loss = np.broadcast_to(np.asarray(self.baseline_loss_db, dtype=float), (J, N)).copy()
        loss.setflags(write=False)
        object.__setattr__(self, "baseline_loss_db", loss)
        crossings = tuple(sorted((float(t), int(d)) for t, d in self.crossings))
        object.__setattr__(self, "crossings", crossings)
        if not self.duration_s > 0:
            raise ValueError("duration_s must be > 0")
        if not self.dip_width_s > 0:
            raise ValueError("dip_width_s must be > 0")
        if not self.dip_depth_db > 0:
            raise ValueError("dip_depth_db must be > 0")
        if not self.noise_std_db >= 0:
            raise ValueError("noise_std_db must be >= 0")
        for t, d in crossings:
            if not 0 <= t <= self.duration_s:
                raise ValueError(f"crossing at {t} s outside [0, {self.duration_s}]")
            if d not in (1, -1):
                raise ValueError(f"crossing direction must be +1 or -1, got {d}")

    @property
    def num_packets(self) -> int:
        return int(round(self.duration_s * self.meta.nominal_rate_hz))

    def to_dict(self) -> dict:
        loss = self.baseline_loss_db
        return {
            "meta": self.meta.to_dict(),
            "duration_s": self.duration_s,
            "baseline_loss_db": float(loss.flat[0]) if np.all(loss == loss.flat[0]) else loss.tolist(),
            "antenna_spacing_s": self.antenna_spacing_s,
            "crossings": [[t, d] for t, d in self.crossings],
            "dip_depth_db": self.dip_depth_db,
            "dip_width_s": self.dip_width_s,
            "noise_std_db": self.noise_std_db,
            "tx_regime": self.tx_regime.to_dict(),
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioConfig":
        known = {
            "duration_s", "baseline_loss_db", "antenna_spacing_s", "crossings",
            "dip_depth_db", "dip_width_s", "noise_std_db", "rng_seed",
        }
        unknown = set(d) - known - {"meta", "tx_regime"}
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(
            meta=TraceMeta.from_dict(d["meta"]),
            tx_regime=regime_from_dict(d.get("tx_regime")),
            **{k: d[k] for k in known if k in d},
        )

    def replace(self, **changes) -> "ScenarioConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ScenarioConfig(**d)


def raised_cosine_dip(t, center: float, depth_db: float, width_s: float) -> np.ndarray:
    """Attenuation (positive dB) of a raised-cosine dip of full width ``width_s``."""
    u = (np.asarray(t, dtype=float) - center) / width_s
    return np.where(np.abs(u) <= 0.5, depth_db * 0.5 * (1.0 + np.cos(2.0 * np.pi * u)), 0.0)


def _tx_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0])


def _noise_rng(seed: int, link_id: str, stream: int = 1) -> np.random.Generator:
    return np.random.default_rng([seed, stream, zlib.crc32(link_id.encode("utf-8"))])


def tx_schedule(regime: TxRegime, timestamps, seed: int) -> np.ndarray:
    """Per-packet transmit-power offset in dB for one regime."""
    timestamps = np.asarray(timestamps, dtype=float)
    rng = _tx_rng(seed)
    if isinstance(regime, Normal):
        return np.zeros(len(timestamps))
    if isinstance(regime, Random):
        return rng.choice(np.asarray(regime.levels_db), size=len(timestamps))
    if isinstance(regime, LineCross):
        schedule = np.zeros(len(timestamps))
        for c in linecross_centers(regime, timestamps, seed):
            schedule -= raised_cosine_dip(timestamps, c, regime.depth_db, regime.width_s)
        return schedule
    raise TypeError(f"unsupported regime {regime!r}")


def linecross_centers(regime: LineCross, timestamps, seed: int) -> np.ndarray:
    """Centre times of the power dips that :func:`tx_schedule` places."""
    timestamps = np.asarray(timestamps, dtype=float)
    rng = _tx_rng(seed)
    centers = []
    if len(timestamps):
        t = timestamps[0] + rng.uniform(regime.period_min_s, regime.period_max_s)
        while t <= timestamps[-1]:
            centers.append(t)
            t += rng.uniform(regime.period_min_s, regime.period_max_s)
    return np.array(centers)


def crossing_attenuation(config: ScenarioConfig, timestamps) -> np.ndarray:
    """Per-frame, per-pair crossing attenuation in dB, shape ``(frames, pairs)``."""
    timestamps = np.asarray(timestamps, dtype=float)
    d = config.meta.spatial_array()
    att = np.zeros((len(timestamps), config.meta.num_pairs))
    for center, direction in config.crossings:
        pair_centers = center + direction * d * config.antenna_spacing_s
        att += raised_cosine_dip(timestamps[:, None], pair_centers[None, :], config.dip_depth_db, config.dip_width_s)
    return att


def gen_trace(config: ScenarioConfig) -> tuple[Trace, GroundTruth, np.ndarray]:
    """Generate ``(trace, truth, tx_schedule)`` for one link."""
    meta = config.meta
    n = config.num_packets
    timestamps = np.arange(n) / meta.nominal_rate_hz
    schedule = tx_schedule(config.tx_regime, timestamps, config.rng_seed)
    att = crossing_attenuation(config, timestamps)
    mag = schedule[:, None, None] - config.baseline_loss_db[None, :, :] - att[:, :, None]
    if config.noise_std_db > 0:
        rng = _noise_rng(config.rng_seed, meta.link_id)
        mag = mag + rng.normal(0.0, config.noise_std_db, size=mag.shape)
    truth = GroundTruth(tuple(CrossingEvent(t, meta.link_id, d) for t, d in config.crossings))
    return Trace(meta, np.arange(n), timestamps, mag), truth, schedule


def apply_tx_schedule(trace: Trace, schedule, noise_std_db: float = 0.0, rng_seed: int = 0) -> Trace:
    """Shift every present cell of frame ``n`` by ``schedule[n]`` and add i.i.d. noise."""
    schedule = np.asarray(schedule, dtype=float).reshape(-1)
    if len(schedule) != len(trace):
        raise ValueError(f"schedule length {len(schedule)} != frame count {len(trace)}")
    if noise_std_db < 0:
        raise ValueError("noise_std_db must be >= 0")
    mag = trace.magnitude + schedule[:, None, None]
    if noise_std_db > 0:
        rng = _noise_rng(rng_seed, trace.meta.link_id, stream=2)
        mag = mag + rng.normal(0.0, noise_std_db, size=mag.shape)
    return trace.with_magnitude(mag)


def corrupt_pair(trace: Trace, pair_id: int, noise_std_db: float, rng_seed: int = 0) -> Trace:
    """Add per-packet gain noise, shared by all subcarriers, to one pair.

    Models a badly faded antenna pair whose whole frame jitters together.
    """
    if not 0 <= pair_id < trace.meta.num_pairs:
        raise ValueError(f"pair {pair_id} outside [0, {trace.meta.num_pairs})")
    rng = _noise_rng(rng_seed, trace.meta.link_id, stream=3)
    mag = trace.magnitude.copy()
    mag[:, pair_id, :] += rng.normal(0.0, noise_std_db, size=len(trace))[:, None]
    return trace.with_magnitude(mag)
