"""Deployment presets: detector windows and synthetic scenarios.

``hallway`` and ``house`` carry the window sizes used for the two field
deployments (a person walking at 0.5 m/s past a concrete wall, and faster
walking inside a house).
"""

from __future__ import annotations

import numpy as np

from .evaluation import WindowSettings
from .synth import Normal, ScenarioConfig, TxRegime
from .trace_model import TraceMeta

HALLWAY = WindowSettings(ws_s=4.0, wl_s=40.0, delta_s=4.0)
HOUSE = WindowSettings(ws_s=2.0, wl_s=20.0, delta_s=4.0)
PRESETS = {"hallway": HALLWAY, "house": HOUSE}

# a 3x3 MIMO link: pair j = tx_antenna * 3 + rx_antenna
MIMO_PAIRS = 9
CSI_SUBCARRIERS = 30
# walker passes the second receiver this long after (or before) the first
RECEIVER_GAP_S = 6.0


def mimo_spatial_index(num_rx: int = 3, num_tx: int = 3) -> dict[int, float]:
    """Spatial index of each pair: its receive antenna's position, centred on 0."""
    centre = (num_rx - 1) / 2
    return {tx * num_rx + rx: float(rx - centre) for tx in range(num_tx) for rx in range(num_rx)}


def crossing_schedule(n: int, start_s: float, stop_s: float, alternate: bool = True) -> list[tuple[float, int]]:
    """``n`` evenly spaced crossings; directions alternate +1/-1 when asked."""
    times = np.linspace(start_s, stop_s, n) if n > 1 else np.array([start_s])
    return [(float(round(t, 6)), (1 if i % 2 == 0 else -1) if alternate else 1) for i, t in enumerate(times)]


def hallway_scenario(
    seed: int = 0,
    tx_regime: TxRegime | None = None,
    n_crossings: int = 20,
    duration_s: float = 600.0,
    rate_hz: float = 12.0,
    antenna_spacing_s: float = 0.5,
    noise_std_db: float = 0.67,
    num_receivers: int = 2,
) -> list[ScenarioConfig]:
    """WiFi hallway: one 3x3 transmitter heard by ``num_receivers`` receivers.

    Receiver ``r`` sees each crossing ``r * RECEIVER_GAP_S`` seconds later when
    walking in the + direction and earlier in the - direction.  All links share
    the transmit-power schedule.
    """
    tx_regime = tx_regime or Normal()
    margin = 40.0 + 20.0  # long window warm-up plus slack
    base = crossing_schedule(n_crossings, margin, duration_s - margin / 3)
    links = []
    for r in range(num_receivers):
        meta = TraceMeta(f"rx{r + 1}", MIMO_PAIRS, CSI_SUBCARRIERS, rate_hz, mimo_spatial_index())
        crossings = [(t + d * r * RECEIVER_GAP_S, d) for t, d in base]
        links.append(
            ScenarioConfig(
                meta=meta,
                duration_s=duration_s,
                baseline_loss_db=60.0 + 5.0 * r,
                antenna_spacing_s=antenna_spacing_s,
                crossings=crossings,
                noise_std_db=noise_std_db,
                tx_regime=tx_regime,
                rng_seed=seed,
            )
        )
    return links


def zigbee_scenario(
    seed: int = 0,
    tx_regime: TxRegime | None = None,
    n_crossings: int = 20,
    duration_s: float = 600.0,
    rate_hz: float = 12.0,
    antenna_spacing_s: float = 0.5,
    noise_std_db: float = 0.67,
    num_groups: int = 2,
) -> list[ScenarioConfig]:
    """ZigBee: groups of three single-antenna receivers, one RSS value each.

    A group maps onto one link with three "pairs" and one subcarrier.
    """
    tx_regime = tx_regime or Normal()
    margin = 60.0
    base = crossing_schedule(n_crossings, margin, duration_s - margin / 3)
    links = []
    for g in range(num_groups):
        meta = TraceMeta(f"group{g + 1}", 3, 1, rate_hz, {0: -1.0, 1: 0.0, 2: 1.0})
        crossings = [(t + d * g * RECEIVER_GAP_S, d) for t, d in base]
        links.append(
            ScenarioConfig(
                meta=meta,
                duration_s=duration_s,
                baseline_loss_db=[[70.0], [72.0], [68.0]],
                antenna_spacing_s=antenna_spacing_s,
                crossings=crossings,
                noise_std_db=noise_std_db,
                tx_regime=tx_regime,
                rng_seed=seed,
            )
        )
    return links


def house_scenario(seed: int = 0, tx_regime: TxRegime | None = None, **kwargs) -> list[ScenarioConfig]:
    """Two WiFi receivers with a faster walker: narrower dips, tighter stagger."""
    kwargs.setdefault("antenna_spacing_s", 0.4)
    links = hallway_scenario(seed=seed, tx_regime=tx_regime, **kwargs)
    return [c.replace(dip_width_s=1.6) for c in links]


SCENARIOS = {"hallway": hallway_scenario, "house": house_scenario, "zigbee": zigbee_scenario}
SCENARIO_WINDOWS = {"hallway": HALLWAY, "house": HOUSE, "zigbee": HALLWAY}
