"""Command-line pipeline: simulate -> filter -> evaluate / report / bench.

Exit codes: 0 success, 1 domain error (bad data, no ground truth, filter
divergence), 2 usage or I/O error. All subcommands are pure pipelines:
the same inputs and seed produce byte-identical outputs, SVG included,
and no subcommand mutates its inputs.
"""

import argparse
import sys

import numpy as np

from . import __version__, metrics, session_io
from .bank import Frame, filter_session, new_bank, throughput_bench
from .errors import FidtrackError
from .rigidbody import pairwise_distances, simulate_session
from .session_io import AppConfig, default_config, read_config

_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


class UsageError(Exception):
    """CLI-level misuse that argparse cannot catch itself."""


def _load_config(path) -> AppConfig:
    if path is None:
        return default_config()
    return read_config(path)


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    sim = config.sim
    if args.seed is not None:
        sim.seed = args.seed
    if args.duration is not None:
        sim.duration = args.duration
    if args.fps is not None:
        sim.fps = args.fps
    session = simulate_session(sim)
    session_io.write_session(session, args.out)
    dists = pairwise_distances(sim.fiducial_initials)
    print("consecutive-pair distances (mm): " + " ".join(f"{d:.2f}" for d in dists))
    resid = session.measured - session.truth
    emp = np.sqrt(np.mean(resid * resid, axis=(0, 1)))
    print("noise std configured (mm): " + " ".join(f"{s:.4f}" for s in sim.noise_std))
    print("noise std empirical  (mm): " + " ".join(f"{s:.4f}" for s in emp))
    print(f"wrote {session.n_steps * session.n_fiducials} rows to {args.out}")
    return 0


def cmd_filter(args) -> int:
    config = _load_config(args.config)
    fs = config.filter
    gate = args.gate if args.gate is not None else fs.gate_threshold
    session = session_io.read_session(args.input)
    filtered = filter_session(
        session,
        fs.to_filter_config(dt=session.dt),
        gate_threshold=gate,
        persistence=fs.gate_persistence,
        reject_gated=fs.reject_gated,
    )
    session_io.write_filtered(filtered, args.out)
    n_flagged = int(filtered.occluded_suspect.sum())
    print(f"filtered {filtered.n_steps} frames x {filtered.n_fiducials} fiducials; "
          f"{n_flagged} fiducial-frames flagged occluded_suspect")
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    burnout = args.burnout if args.burnout is not None else config.filter.burnout
    session = session_io.read_session(args.truth_session)
    filtered = session_io.read_filtered(args.filtered_session)
    report = metrics.build_report(session, filtered, burnout=burnout)
    if args.format == "csv":
        text = metrics.report_to_csv(report)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            print(f"wrote {args.out}")
        else:
            sys.stdout.write(text)
    else:
        print(metrics.format_table(report))
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(metrics.report_to_csv(report))
            print(f"wrote {args.out}")
    return 0


def _svg_chart(series, n_points) -> str:
    """Standalone SVG line chart; one polyline per named series."""
    width, height, margin = 800, 400, 45
    all_y = np.concatenate([y for _, y, _ in series])
    finite = all_y[np.isfinite(all_y)]
    y_lo = float(finite.min()) if finite.size else 0.0
    y_hi = float(finite.max()) if finite.size else 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    span_x = max(n_points - 1, 1)

    def sx(i):
        return margin + (width - 2 * margin) * i / span_x

    def sy(v):
        return height - margin - (height - 2 * margin) * (v - y_lo) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
    ]
    for idx, (name, ys, color) in enumerate(series):
        pts = " ".join(
            f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(ys) if np.isfinite(v)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{margin + 8}" y="{margin + 16 + 16 * idx}" '
                     f'fill="{color}" font-size="13">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_report(args) -> int:
    session = session_io.read_session(args.session)
    filtered = session_io.read_filtered(args.filtered_session)
    if filtered.refined.shape != session.measured.shape:
        raise FidtrackError("session and filtered file do not cover the same frames")
    f = args.fiducial
    if not 0 <= f < session.n_fiducials:
        raise UsageError(f"fiducial {f} out of range 0..{session.n_fiducials - 1}")
    ax = _AXIS_INDEX[args.axis]
    n = session.n_steps
    window = args.last if args.last is not None else n
    if window > n:
        print(f"warning: window {window} larger than session, clipped to {n}",
              file=sys.stderr)
        window = n
    if window < 1:
        raise UsageError("--last must be >= 1")
    start = n - window
    ks = np.arange(start, n)
    meas = session.measured[start:, f, ax]
    ref = filtered.refined[start:, f, ax]
    truth = session.truth[start:, f, ax] if session.has_truth else None

    if args.format == "svg":
        series = [("measured", meas, "#888888"), ("refined", ref, "#d62728")]
        if truth is not None:
            series.insert(0, ("truth", truth, "#1f77b4"))
        text = _svg_chart(series, window)
    else:
        cols = "k,truth,measured,refined" if truth is not None else "k,measured,refined"
        lines = [cols]
        for i, k in enumerate(ks):
            cells = [str(int(k))]
            if truth is not None:
                cells.append(session_io._fmt(truth[i]))
            cells.append(session_io._fmt(meas[i]))
            cells.append(session_io._fmt(ref[i]))
            lines.append(",".join(cells))
        text = "\n".join(lines) + "\n"

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    if args.frames < 10_000:
        raise UsageError("--frames must be >= 10000")
    config = _load_config(args.config)
    fs = config.filter
    nf = config.sim.n_fiducials
    rng = np.random.default_rng(12345)
    base = np.asarray(config.sim.fiducial_initials, dtype=np.float64)
    readings = base[None, :, :] + rng.normal(0.0, 0.2, size=(args.frames, nf, 3))
    frames = [Frame(k=k, t=k * fs.dt_s, readings=list(readings[k])) for k in range(args.frames)]
    bank = new_bank(nf, fs.to_filter_config(), gate_threshold=fs.gate_threshold,
                    persistence=fs.gate_persistence)
    rate = throughput_bench(bank, frames)
    print(f"fiducial updates/sec (single thread): {rate:.0f}")
    print(f"per-update latency: {1e6 / rate:.2f} us")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fidtrack",
        description="Per-fiducial Kalman filtering for optical array tracking",
    )
    parser.add_argument("--version", action="version", version=f"fidtrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic tracking session")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="output session file")
    p.add_argument("--seed", type=int, help="override sim.seed")
    p.add_argument("--duration", type=float, help="override sim.duration (s)")
    p.add_argument("--fps", type=float, help="override sim.fps (Hz)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="run the filter bank over a recorded session")
    p.add_argument("input", help="input session file")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="output filtered file")
    p.add_argument("--gate", type=float, help="override NIS gate threshold")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("evaluate", help="MSE/variance report against ground truth")
    p.add_argument("truth_session", help="session file with ground truth")
    p.add_argument("filtered_session", help="filtered output file")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--burnout", type=int, help="override burnout sample count")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out", help="also write the report CSV here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="plot-ready series for one fiducial/axis")
    p.add_argument("session", help="session file (raw measurements, truth if present)")
    p.add_argument("filtered_session", help="filtered output file")
    p.add_argument("--fiducial", type=int, required=True, help="fiducial id (0-based)")
    p.add_argument("--axis", choices=("x", "y", "z"), required=True)
    p.add_argument("--last", type=int, help="only the last N samples")
    p.add_argument("--format", choices=("csv", "svg"), default="csv")
    p.add_argument("--out", help="output path (default: stdout, csv only)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench", help="single-thread filter throughput")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--frames", type=int, default=100_000, help="frames to process")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FidtrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry_point() -> None:
    raise SystemExit(main())
