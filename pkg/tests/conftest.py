import numpy as np
import pytest

from radiowin.presets import hallway_scenario
from radiowin.synth import gen_trace
from radiowin.trace_model import Trace, TraceMeta


def make_trace(mag, rate=12.0, link_id="L", spatial_index=None, packets=None):
    mag = np.asarray(mag, dtype=float)
    if mag.ndim == 1:
        mag = mag[:, None, None]
    F, J, N = mag.shape
    meta = TraceMeta(link_id, J, N, rate, spatial_index or {})
    packets = np.arange(F) if packets is None else packets
    return Trace(meta, packets, np.asarray(packets) / rate, mag)


@pytest.fixture(scope="session")
def hallway_normal():
    """Two-receiver hallway deployment, seed 0, fixed transmit power."""
    return [gen_trace(c) for c in hallway_scenario(seed=0)]
