"""Through-wall line-crossing detection from per-packet channel measurements."""

__version__ = "0.1.0"

from .compensator import Compensator, TxEstimate, compensate_trace, compensate_traces, estimate_tx_change
from .detector import DetectionEvent, DetectorParams, PairDetection, run_detector
from .direction import DirectionResult, fit_direction
from .evaluation import Metrics, WindowSettings, ablate_majority, rate_sweep, score
from .pipeline import Detection, analyze
from .synth import LineCross, Normal, Random, ScenarioConfig, apply_tx_schedule, gen_trace
from .trace_model import GroundTruth, Trace, TraceMeta, downsample, parse_trace, read_trace, serialize_trace, write_trace

__all__ = [
    "Compensator", "TxEstimate", "compensate_trace", "compensate_traces", "estimate_tx_change",
    "DetectionEvent", "DetectorParams", "PairDetection", "run_detector",
    "DirectionResult", "fit_direction",
    "Metrics", "WindowSettings", "ablate_majority", "rate_sweep", "score",
    "Detection", "analyze",
    "LineCross", "Normal", "Random", "ScenarioConfig", "apply_tx_schedule", "gen_trace",
    "GroundTruth", "Trace", "TraceMeta", "downsample", "parse_trace", "read_trace", "serialize_trace", "write_trace",
]
