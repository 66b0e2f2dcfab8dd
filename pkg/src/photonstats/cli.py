"""Command-line front end: ``photonstats {analyze,simulate,boundary,g2,sweep}``.

Every file written gets a ``<file>.manifest.json`` sidecar recording the
command line, config hash, inputs, seed, tool version and timestamps.
Exit codes: 0 success, 2 usage error, 3 data error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .coincidence import (
    WindowSpec,
    count_triggered,
    cross_histogram,
    g2_peak_ratio,
    peak_areas,
    with_periodic_triggers,
)
from .estimators import estimate_stats
from .ngwitness import sample_boundary, witness
from .simsource import MODELS, load_config, oracle_stats, simulate
from .tagstream import StreamFormatError, read_stream, write_stream

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3

ANALYZE_FIELDS = ("window_ps", "window_ns", "p0", "sigma_p0", "p1", "sigma_p1", "p2plus",
                  "sigma_p2plus", "low_count_flag", "delta_w_sigma", "side", "r0", "r1a", "r1b",
                  "r2")
BOUNDARY_FIELDS = ("p1", "p2_boundary")
SWEEP_FIELDS = ("param", "value", "seed") + ANALYZE_FIELDS + ("oracle_p0", "oracle_p1",
                                                              "oracle_p2plus")
G2_SUMMARY_FIELDS = ("g2", "sigma_g2", "period_ps", "integration_ps", "far_peak_min_index",
                     "center_area", "near_peak_area", "far_mean_area")


class DataError(Exception):
    """Input data that cannot be analysed; maps to exit code 3."""


@dataclass(frozen=True)
class RunManifest:
    command: list[str]
    config_hash: str | None
    inputs: dict[str, str]
    seed: int | None
    version: str
    started: str
    finished: str
    outputs: list[str] = field(default_factory=list)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class _Run:
    """Collects what a manifest needs while a command executes."""

    def __init__(self, argv: Sequence[str], seed: int | None):
        self.argv = list(argv)
        self.seed = seed
        self.config_hash: str | None = None
        self.inputs: dict[str, str] = {}
        self.started = _now()

    def add_input(self, path: str) -> None:
        self.inputs[str(path)] = _sha256(path)

    def manifest_for(self, out: Path, outputs: list[str]) -> None:
        doc = RunManifest(["photonstats", *self.argv], self.config_hash, self.inputs, self.seed,
                          __version__, self.started, _now(), outputs)
        out.with_name(out.name + ".manifest.json").write_text(
            json.dumps(asdict(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(v: Any) -> Any:
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _render(rows: list[dict], fields: Sequence[str], fmt: str) -> str:
    if fmt == "json":
        clean = [{k: (None if isinstance(r[k], float) and math.isnan(r[k]) else r[k])
                  for k in fields} for r in rows]
        return json.dumps(clean, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in fields})
    return buf.getvalue()


def _emit(text: str, out: str | None, run: _Run) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text, encoding="utf-8")
    run.manifest_for(path, [str(path)])


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _channels(text: str) -> dict[int, str]:
    names = {"trigger": "trigger", "a": "signal_a", "b": "signal_b",
             "signal_a": "signal_a", "signal_b": "signal_b"}
    roles: dict[int, str] = {}
    try:
        for item in text.split(","):
            key, ch = item.split("=")
            roles[int(ch)] = names[key.strip()]
    except (ValueError, KeyError):
        raise argparse.ArgumentTypeError(
            f"expected e.g. trigger=0,a=1,b=2, got {text!r}") from None
    if sorted(roles.values()) != ["signal_a", "signal_b", "trigger"]:
        raise argparse.ArgumentTypeError("need distinct channels for trigger, a and b")
    return roles


def analysis_row(counts, t: float) -> dict:
    """One table row (stats, witness and counts) for a coincidence count."""
    stats = estimate_stats(counts, t)
    wr = witness(stats)
    w = counts.window.width_ps
    return {
        "window_ps": w, "window_ns": f"{w / 1000:.2f}", **{k: v for k, v in stats.to_row().items()
                                                          if k != "window_ps"},
        "delta_w_sigma": wr.delta_w_sigma, "side": wr.side,
        "r0": counts.r0, "r1a": counts.r1a, "r1b": counts.r1b, "r2": counts.r2,
    }


def _load_stream(args, run: _Run):
    run.add_input(args.stream)
    if args.channels is None:
        return read_stream(args.stream, args.input_format, duration_ps=args.duration_ps)
    # read permissively, then keep roles only for channels that matter so
    # free channel numbers remain for synthetic triggers
    permissive = {**{ch: "other" for ch in range(256)}, **args.channels}
    stream = read_stream(args.stream, args.input_format, duration_ps=args.duration_ps,
                         channel_roles=permissive)
    present = {int(ch) for ch in np.unique(stream.channels)}
    return stream.with_roles({**{ch: "other" for ch in present}, **args.channels})


def cmd_analyze(args, run: _Run) -> None:
    stream = _load_stream(args, run)
    if len(stream) == 0:
        raise DataError(f"{args.stream}: stream holds no tags")
    if args.trigger == "periodic":
        if args.period_ps is None:
            raise DataError("periodic trigger mode needs --period-ps")
        stream = with_periodic_triggers(stream, args.period_ps, args.phase_ps)
    rows = []
    for w in args.windows:
        counts = count_triggered(stream, WindowSpec(w, args.offset_ps),
                                 chunks=max(1, args.workers), workers=args.workers)
        if counts.r0 == 0:
            raise DataError(f"{args.stream}: no trigger tags")
        rows.append(analysis_row(counts, args.t))
    _emit(_render(rows, ANALYZE_FIELDS, args.format), args.out, run)


def _config(args):
    cfg = load_config(args.model, args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def cmd_simulate(args, run: _Run) -> None:
    if args.config:
        run.add_input(args.config)
    cfg = _config(args)
    run.config_hash = cfg.config_hash()
    run.seed = cfg.seed
    stream = simulate(cfg)
    out = Path(args.out)
    write_stream(stream, out, args.stream_format, sidecar=True)
    run.manifest_for(out, [str(out), str(out) + ".meta.json"])


def cmd_boundary(args, run: _Run) -> None:
    if args.n < 2:
        raise argparse.ArgumentTypeError("n must be at least 2")
    try:
        pts = sample_boundary(args.p1_lo, args.p1_hi, args.n)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    rows = [{"p1": p1, "p2_boundary": p2} for p1, p2 in pts]
    _emit(_render(rows, BOUNDARY_FIELDS, args.format), args.out, run)


def cmd_g2(args, run: _Run) -> None:
    stream = _load_stream(args, run)
    ch_x = stream.channel_for("signal_a") if args.ch_x is None else args.ch_x
    ch_y = stream.channel_for("signal_b") if args.ch_y is None else args.ch_y
    hist = cross_histogram(stream, ch_x, ch_y, args.bin_ps, args.range_ps)
    ratio = g2_peak_ratio(hist, args.period_ps, args.integration_ps, args.far_peak_min_index)
    areas = peak_areas(hist, args.period_ps, args.integration_ps)
    far = [a for k, a in areas.items() if abs(k) >= args.far_peak_min_index]
    summary = {
        "g2": ratio.value, "sigma_g2": ratio.sigma, "period_ps": args.period_ps,
        "integration_ps": args.integration_ps, "far_peak_min_index": args.far_peak_min_index,
        "center_area": areas.get(0, 0),
        "near_peak_area": (areas.get(-1, 0) + areas.get(1, 0)) / 2.0,
        "far_mean_area": sum(far) / len(far),
    }
    out = Path(args.out)
    hist.to_csv(out)
    summary_path = out.with_name(out.stem + ".summary." + args.format)
    summary_path.write_text(_render([summary], G2_SUMMARY_FIELDS, args.format), encoding="utf-8")
    run.manifest_for(out, [str(out), str(summary_path)])


def cmd_sweep(args, run: _Run) -> None:
    if not args.values:
        raise argparse.ArgumentTypeError("sweep needs at least one value")
    if args.config:
        run.add_input(args.config)
    base = _config(args)
    if args.param not in base.to_dict() or args.param in ("seed", "duration_ps"):
        raise argparse.ArgumentTypeError(f"cannot sweep {args.param!r} for {args.model}")
    run.config_hash = base.config_hash()
    run.seed = base.seed
    rows = []
    integer = isinstance(base.to_dict()[args.param], int)
    for value in args.values:
        if integer and float(value).is_integer():
            value = int(value)
        cfg = base.replace(**{args.param: value})
        stream = None if args.oracle_only else simulate(cfg)
        for w in args.windows:
            window = WindowSpec(w, args.offset_ps)
            orc = oracle_stats(cfg, window)
            row = {"param": args.param, "value": value, "seed": cfg.seed,
                   "oracle_p0": orc.p0, "oracle_p1": orc.p1, "oracle_p2plus": orc.p2plus}
            if stream is None:
                row.update({k: "" for k in ANALYZE_FIELDS})
                row.update(window_ps=w, window_ns=f"{w / 1000:.2f}")
            else:
                counts = count_triggered(stream, window)
                if counts.r0 == 0:
                    row.update({k: "" for k in ANALYZE_FIELDS})
                    row.update(window_ps=w, window_ns=f"{w / 1000:.2f}", r0=0)
                else:
                    row.update(analysis_row(counts, cfg.splitter_t))
            rows.append(row)
    _emit(_render(rows, SWEEP_FIELDS, args.format), args.out, run)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonstats", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="table output format (default csv)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--channels", type=_channels, default=None,
                   help="channel roles, e.g. trigger=0,a=1,b=2")
    sub = p.add_subparsers(dest="command", required=True)

    def stream_args(sp):
        sp.add_argument("stream", help="tag stream file")
        sp.add_argument("--input-format", choices=("binary", "csv"), default="binary")
        sp.add_argument("--duration-ps", type=int, default=None,
                        help="stream duration (CSV input without sidecar)")

    a = sub.add_parser("analyze", help="photon statistics and witness per window")
    stream_args(a)
    a.add_argument("--windows", type=_int_list, required=True, help="window widths in ps")
    a.add_argument("--offset-ps", type=int, default=0)
    a.add_argument("--t", type=float, default=0.5, help="splitting ratio toward arm A")
    a.add_argument("--trigger", choices=("channel", "periodic"), default="channel")
    a.add_argument("--period-ps", type=int, default=None)
    a.add_argument("--phase-ps", type=int, default=0)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--out", default=None, help="output file (default stdout)")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="write a simulated tag stream")
    s.add_argument("model", choices=sorted(MODELS))
    s.add_argument("--config", default=None, help="JSON config document")
    s.add_argument("--out", required=True)
    s.add_argument("--stream-format", choices=("binary", "csv"), default="binary")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("boundary", help="sample the Gaussian-mixture boundary")
    b.add_argument("--p1-lo", type=float, default=1e-4)
    b.add_argument("--p1-hi", type=float, default=0.2)
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--out", default=None)
    b.set_defaults(func=cmd_boundary)

    g = sub.add_parser("g2", help="cross-correlation histogram and peak ratio")
    stream_args(g)
    g.add_argument("--bin-ps", type=int, required=True)
    g.add_argument("--range-ps", type=int, required=True)
    g.add_argument("--period-ps", type=float, required=True)
    g.add_argument("--integration-ps", type=float, required=True)
    g.add_argument("--far-peak-min-index", type=int, default=1)
    g.add_argument("--ch-x", type=int, default=None)
    g.add_argument("--ch-y", type=int, default=None)
    g.add_argument("--out", required=True, help="histogram CSV")
    g.set_defaults(func=cmd_g2)

    w = sub.add_parser("sweep", help="simulate and analyse over one swept parameter")
    w.add_argument("model", choices=sorted(MODELS))
    w.add_argument("--config", default=None)
    w.add_argument("--param", required=True)
    w.add_argument("--values", type=_float_list, required=True)
    w.add_argument("--windows", type=_int_list, required=True)
    w.add_argument("--offset-ps", type=int, default=0)
    w.add_argument("--oracle-only", action="store_true", help="skip simulation")
    w.add_argument("--out", default=None)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    run = _Run(argv, args.seed)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args, run)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"photonstats: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, StreamFormatError, ValueError, OSError) as exc:
        print(f"photonstats: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
