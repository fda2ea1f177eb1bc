"""Command-line entry point: ``radiowin synth | detect | eval | sweep``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .compensator import default_refresh_period
from .evaluation import DEFAULT_TOLERANCE_S, WindowSettings, format_table, metrics_json, rate_sweep, score
from .pipeline import analyze
from .presets import PRESETS, SCENARIOS, SCENARIO_WINDOWS
from .synth import ScenarioConfig, gen_trace, regime_from_dict
from .trace_model import (
    CrossingEvent,
    GroundTruth,
    InvalidRateError,
    read_ground_truth,
    read_trace,
    serialize_ground_truth,
    serialize_trace,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_atomic(files: dict[Path, str]) -> None:
    """Write all outputs only after every one of them has been rendered."""
    for path, text in files.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None


def _window_settings(args, config: dict) -> WindowSettings:
    base = PRESETS[args.preset] if getattr(args, "preset", None) else PRESETS["hallway"]
    cfg = config.get("detector", {})
    fields = {
        "ws_s": args.ws if args.ws is not None else cfg.get("ws_s", base.ws_s),
        "wl_s": args.wl if args.wl is not None else cfg.get("wl_s", base.wl_s),
        "delta_s": args.delta if args.delta is not None else cfg.get("delta_s", base.delta_s),
        "C": args.C if args.C is not None else cfg.get("C", base.C),
        "majority_quorum": args.quorum if args.quorum is not None else cfg.get("majority_quorum", base.majority_quorum),
    }
    settings = WindowSettings(**fields)
    if not 0 < settings.ws_s < settings.wl_s:
        raise UsageError(f"need 0 < --ws < --wl (got {settings.ws_s}, {settings.wl_s})")
    if not settings.C > 0:
        raise UsageError("--C must be > 0")
    if settings.delta_s < 0:
        raise UsageError("--delta must be >= 0")
    if settings.majority_quorum is not None and settings.majority_quorum < 1:
        raise UsageError("--quorum must be >= 1")
    return settings


def _add_detector_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="window preset (default hallway)")
    p.add_argument("--config", help="JSON file with a 'detector' object of the same fields")
    p.add_argument("--ws", type=float, help="short window, seconds")
    p.add_argument("--wl", type=float, help="long window, seconds")
    p.add_argument("--C", type=float, help="threshold constant")
    p.add_argument("--delta", type=float, help="merge interval, seconds")
    p.add_argument("--quorum", type=int, help="pairs needed for a majority vote")


# --- synth -------------------------------------------------------------------


def _scenario_from_args(args) -> tuple[list[ScenarioConfig], WindowSettings, dict]:
    config = _load_config(args.config)
    if args.preset and config.get("links"):
        raise UsageError("give either --preset or a --config with links, not both")
    regime = regime_from_dict({"kind": args.regime}) if args.regime else None
    if config.get("links") or "meta" in config:
        raw = config.get("links") or [config]
        links = [ScenarioConfig.from_dict(d) for d in raw]
        if args.seed is not None:
            links = [c.replace(rng_seed=args.seed) for c in links]
        if regime is not None:
            links = [c.replace(tx_regime=regime) for c in links]
        windows = WindowSettings(**config["detector"]) if "detector" in config else PRESETS["hallway"]
        source = {"config": str(args.config)}
    else:
        name = args.preset or "hallway"
        kwargs = {"seed": args.seed if args.seed is not None else 0}
        if regime is not None:
            kwargs["tx_regime"] = regime
        links = SCENARIOS[name](**kwargs)
        windows = SCENARIO_WINDOWS[name]
        source = {"preset": name}
    rates = {c.meta.nominal_rate_hz for c in links}
    if len(rates) != 1 or len({c.duration_s for c in links}) != 1:
        raise UsageError("all links of a scenario must share rate and duration")
    return links, windows, source


def cmd_synth(args) -> int:
    links, windows, source = _scenario_from_args(args)
    out = Path(args.out)
    suffix = ".csv" if args.format == "csv" else ".jsonl"
    files: dict[Path, str] = {}
    events: list[CrossingEvent] = []
    schedule = None
    trace_files = []
    for cfg in links:
        trace, truth, sched = gen_trace(cfg)
        schedule = sched if schedule is None else schedule
        path = out / f"{cfg.meta.link_id}{suffix}"
        files.update(_render_trace(trace, path))
        trace_files.append(path.name)
        events.extend(truth.events)
    truth = GroundTruth(tuple(sorted(events, key=lambda e: (e.time, e.link_id))))
    buf = io.StringIO()
    write_rows = csv.writer(buf, lineterminator="\n")
    write_rows.writerow(["packet", "tx_offset_db"])
    for n, v in enumerate(schedule):
        write_rows.writerow([n, repr(float(v))])
    files[out / "tx_schedule.csv"] = buf.getvalue()
    files[out / "truth.csv"] = serialize_ground_truth(truth)
    manifest = {
        "tool": "radiowin",
        "version": __version__,
        "command": "synth",
        "source": source,
        "seed": links[0].rng_seed,
        "format": args.format,
        "links": [c.to_dict() for c in links],
        "detector": asdict(windows),
        "detector_packets": asdict(windows.resolve(links[0].meta.nominal_rate_hz)),
        "outputs": sorted(trace_files + ["truth.csv", "tx_schedule.csv"]),
    }
    files[out / "manifest.json"] = _dump(manifest)
    _write_atomic(files)
    print(f"wrote {len(links)} link(s), {len(truth)} crossings to {out}")
    return EXIT_OK


def _render_trace(trace, path: Path) -> dict[Path, str]:
    if path.suffix == ".csv":
        return {
            path: serialize_trace(trace, "csv"),
            path.with_suffix(".meta.json"): json.dumps(trace.meta.to_dict(), indent=2) + "\n",
        }
    return {path: serialize_trace(trace, "jsonl")}


# --- detect ------------------------------------------------------------------


def _load_traces(paths):
    traces = []
    for p in paths:
        if not Path(p).exists():
            raise FileNotFoundError(f"trace file not found: {p}")
        traces.append(read_trace(p))
    return traces


def cmd_detect(args) -> int:
    config = _load_config(args.config)
    settings = _window_settings(args, config)
    traces = _load_traces(args.traces)
    if args.emit_tx_estimates and not args.compensate:
        raise UsageError("--emit-tx-estimates needs --compensate")
    rates = {t.meta.nominal_rate_hz for t in traces}
    if len(rates) != 1:
        raise UsageError("all traces must share one nominal rate")
    params = settings.resolve(rates.pop())
    refresh = args.refresh_period
    if args.compensate and refresh is None:
        refresh = default_refresh_period(traces[0])
    result = analyze(traces, params, compensate=args.compensate, refresh_period_packets=refresh)

    records = "".join(json.dumps(d.to_record(), sort_keys=True) + "\n" for d in result.all_detections())
    files: dict[Path, str] = {}
    if args.emit_tx_estimates:
        lines = ["packet,t_hat_db,sample_count"]
        lines += [f"{e.packet_index},{e.t_hat_db!r},{e.sample_count}" for e in result.tx_estimates]
        files[Path(args.emit_tx_estimates)] = "\n".join(lines) + "\n"
    if args.dump_stats:
        files[Path(args.dump_stats)] = _render_stats(traces if not args.compensate else result.compensated, result, params.C)
    if args.out:
        out = Path(args.out)
        files[out] = records
        manifest = {
            "tool": "radiowin",
            "version": __version__,
            "command": "detect",
            "traces": [str(p) for p in args.traces],
            "detector": asdict(settings),
            "detector_packets": asdict(params),
            "compensate": args.compensate,
            "refresh_period_packets": refresh,
            "n_samples": {t.meta.link_id: len(t) for t in traces},
        }
        files[out.with_name(out.name + ".manifest.json")] = _dump(manifest)
    _write_atomic(files)
    if not args.out:
        sys.stdout.write(records)
    return EXIT_OK


def _render_stats(traces, result, C: float) -> str:
    lines = ["link_id,packet,timestamp,pair,v_short,v_long,threshold"]
    for trace in traces:
        st = result.runs[trace.meta.link_id].stats
        thr = st.threshold(C)
        for f in range(st.warmup, len(trace)):
            for j in range(trace.meta.num_pairs):
                lines.append(
                    f"{trace.meta.link_id},{trace.packets[f]},{trace.timestamps[f]!r},{j},"
                    f"{st.v_short[f, j]!r},{st.v_long[f, j]!r},{thr[f, j]!r}"
                )
    return "\n".join(lines) + "\n"


# --- eval --------------------------------------------------------------------


class _ReadDetection:
    def __init__(self, rec: dict):
        self.link_id = rec["link_id"]
        self.trigger_time = float(rec["trigger_time"])
        self.direction = rec.get("direction")


def _read_detections(path: str) -> list[_ReadDetection]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(_ReadDetection(json.loads(line)))
                except (KeyError, ValueError, TypeError) as exc:
                    raise ValueError(f"{path}:{line_no}: malformed detection record ({exc})") from None
    return out


def _n_samples(args, links: list[str]) -> dict[str, int]:
    if args.trace:
        counts = {}
        for p in args.trace:
            t = read_trace(p)
            counts[t.meta.link_id] = len(t)
        return counts
    if args.n_samples is not None:
        return {link: args.n_samples for link in links}
    manifest = Path(args.detections + ".manifest.json")
    if manifest.exists():
        return {k: int(v) for k, v in json.loads(manifest.read_text())["n_samples"].items()}
    raise UsageError("need --trace, --n-samples or a detections manifest to count sample points")


def cmd_eval(args) -> int:
    if args.tolerance < 0:
        raise UsageError("--tolerance must be >= 0")
    dets = _read_detections(args.detections)
    truth = read_ground_truth(args.truth)
    links = sorted({e.link_id for e in truth.events} | {d.link_id for d in dets})
    counts = _n_samples(args, links)
    if args.n_samples is None:
        # truth may cover receivers that were never run through detect
        skipped = [link for link in links if link not in counts and not any(d.link_id == link for d in dets)]
        if skipped:
            print(f"radiowin: note: no trace for {', '.join(skipped)}; not scored", file=sys.stderr)
        links = [link for link in links if link not in skipped]
    rows = {}
    for link in links:
        if link not in counts:
            raise UsageError(f"no sample count for link {link}")
        rows[link] = score([d for d in dets if d.link_id == link], truth.for_link(link), counts[link], args.tolerance)
    files = {Path(args.json): metrics_json(rows)} if args.json else {}
    _write_atomic(files)
    sys.stdout.write(format_table(rows))
    return EXIT_OK


# --- sweep -------------------------------------------------------------------


def _parse_rates(text: str) -> list[float]:
    try:
        rates = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--rates must be comma-separated numbers, got {text!r}") from None
    if not rates:
        raise UsageError("--rates is empty")
    return rates


def cmd_sweep(args) -> int:
    config = _load_config(args.config)
    settings = _window_settings(args, config)
    rates = _parse_rates(args.rates)
    traces = _load_traces(args.traces)
    truth = read_ground_truth(args.truth)
    nominal = traces[0].meta.nominal_rate_hz
    bad = [r for r in rates if not 0 < r <= nominal]
    if bad:
        raise InvalidRateError(f"rates {bad} outside (0, {nominal}] Hz")
    results = rate_sweep(traces, truth, rates, settings, args.tolerance, compensate=args.compensate)
    rows = {f"{r:g} Hz": m for r, m in results.items()}
    files = {Path(args.json): metrics_json(rows)} if args.json else {}
    _write_atomic(files)
    sys.stdout.write(format_table(rows))
    return EXIT_OK


# --- wiring ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radiowin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"radiowin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate synthetic traces with ground truth")
    p.add_argument("--preset", choices=sorted(SCENARIOS))
    p.add_argument("--config", help="scenario JSON (one ScenarioConfig or {'links': [...]})")
    p.add_argument("--seed", type=int)
    p.add_argument("--regime", choices=["normal", "random", "linecross"], help="override the transmit-power regime")
    p.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="detect line crossings in one or more traces")
    p.add_argument("traces", nargs="+", help="trace files (.jsonl, or .csv with .meta.json sidecar)")
    _add_detector_flags(p)
    p.add_argument("--compensate", action="store_true", help="remove transmit-power changes first (pools all traces)")
    p.add_argument("--refresh-period", type=int, help="reference refresh period, packets")
    p.add_argument("--emit-tx-estimates", metavar="CSV")
    p.add_argument("--dump-stats", metavar="CSV", help="per-pair V_short, V_long, threshold")
    p.add_argument("--out", help="detections JSONL (default stdout)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("detections")
    p.add_argument("truth")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE_S)
    p.add_argument("--trace", nargs="+", help="traces to count sample points from")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--json", help="write metrics JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="detection accuracy at lowered transmission rates")
    p.add_argument("traces", nargs="+", help="first trace is scored; all feed --compensate")
    p.add_argument("--truth", required=True)
    p.add_argument("--rates", required=True, help="comma-separated rates in Hz, e.g. 12,6,4,2")
    _add_detector_flags(p)
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE_S)
    p.add_argument("--compensate", action="store_true")
    p.add_argument("--json")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"radiowin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"radiowin: error: {exc}", file=sys.stderr)
        return EXIT_DATA
