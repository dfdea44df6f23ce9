"""Command-line interface: ``mocpd simulate | detect | evaluate``.

File formats
    series.csv      index,value
    truth.csv       cp_index
    detections.csv  index,score,threshold
    trace.csv       index,score,threshold   (one row per scored window)
    report.json     tp, fp, fn, recall, precision, f_beta, mean_delay_samples,
                    mean_delay_days, per_sequence, ...

Every output directory also receives a ``manifest.json``. Errors are
reported as a JSON object on stderr with a non-zero exit code.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from mocpd import __version__
from mocpd.core import MEASURES, SCHEMES, ConfigError, DetectorConfig, SeriesPoint, validate_config
from mocpd.detector import MOCPDDetector, NewmaDetector, StreamResult, run_stream
from mocpd.evaluate import evaluate_corpus
from mocpd.simulate import LEAK_RATES, gen_fuel_leak, gen_gaussian_mixture, gen_jumping_mean


class CliError(Exception):
    def __init__(self, message: str, kind: str = "usage_error"):
        super().__init__(message)
        self.kind = kind


# --------------------------------------------------------------------------- io


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_json(path: Path, payload: dict) -> None:
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv_columns(path: Path, expected: Sequence[str]) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise CliError(f"{path}: no such file", kind="missing_file")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(expected):
            raise CliError(
                f"{path}:1: expected header {','.join(expected)}, got {header}",
                kind="malformed_csv",
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(expected):
                raise CliError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}",
                               kind="malformed_csv")
            rows.append((lineno, [cell.strip() for cell in row]))
    return rows


def read_series(path: Path) -> list[SeriesPoint]:
    points = []
    for lineno, (idx, val) in read_csv_columns(path, ("index", "value")):
        try:
            point = SeriesPoint(int(idx), float(val))
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: {exc}", kind="malformed_csv") from None
        expected = points[-1].index + 1 if points else 0
        if point.index != expected:
            raise CliError(
                f"{path}:{lineno}: index {point.index} breaks contiguity (expected {expected})",
                kind="non_contiguous",
            )
        points.append(point)
    return points


def read_index_column(path: Path, column: str) -> list[int]:
    header = (column,) if column == "cp_index" else ("index", "score", "threshold")
    out = []
    for lineno, row in read_csv_columns(path, header):
        try:
            out.append(int(row[0]))
        except ValueError:
            raise CliError(f"{path}:{lineno}: bad integer {row[0]!r}", kind="malformed_csv") from None
    return out


def timing_stats(ns: Sequence[int]) -> dict:
    if not ns:
        return {"count": 0, "mean_ms": None, "median_ms": None, "p99_ms": None}
    ms = np.asarray(ns, dtype=float) / 1e6
    return {
        "count": int(ms.size),
        "mean_ms": float(ms.mean()),
        "median_ms": float(np.median(ms)),
        "p99_ms": float(np.percentile(ms, 99)),
    }


def manifest(command: str, **extra) -> dict:
    return {"tool": "mocpd", "version": __version__, "command": command, **extra}


# --------------------------------------------------------------------- simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    rng = np.random.default_rng(args.seed)
    params: dict = {"seed": args.seed}
    if args.kind == "jm":
        series = gen_jumping_mean(args.segments, args.seg_len, rng)
        params.update(segments=args.segments, seg_len=args.seg_len)
    elif args.kind == "gm":
        series = gen_gaussian_mixture(args.segments, args.seg_len, rng)
        params.update(segments=args.segments, seg_len=args.seg_len)
    else:
        if args.avg_rate <= 0:
            raise CliError("--avg-rate must be > 0")
        series, scenario = gen_fuel_leak(
            length=args.length, avg_rate=args.avg_rate, sigma=args.sigma,
            seed=args.seed, trend_amplitude=args.trend,
        )
        params.update(
            length=args.length, avg_rate=args.avg_rate, sigma=args.sigma, trend=args.trend,
            drawn_rate=scenario.drawn_rate, leak_start=scenario.start_idx,
            leak_stop=scenario.stop_idx,
        )
    atomic_write(out / "series.csv", csv_text(("index", "value"), enumerate(series.values.tolist())))
    atomic_write(out / "truth.csv", csv_text(("cp_index",), ([c] for c in series.cps)))
    write_json(out / "manifest.json", manifest(
        "simulate", kind=args.kind, params=params, rows=len(series), change_points=len(series.cps),
        outputs=["series.csv", "truth.csv"],
    ))
    return 0


# ----------------------------------------------------------------------- detect


def build_config(args: argparse.Namespace) -> DetectorConfig:
    cfg = DetectorConfig.load(args.config) if args.config else DetectorConfig()
    overrides = {
        "w": args.window, "m": args.memory, "n": args.min_memory, "b": args.buffer,
        "r": args.stride, "alpha": args.alpha, "p": args.quantile, "measure": args.measure,
        "scheme": args.scheme, "seed": args.seed, "tolerance": args.tolerance,
        "mmd_bandwidth": args.mmd_bandwidth,
    }
    cfg = cfg.with_overrides(**overrides)
    if args.ssa_off:
        cfg = cfg.with_overrides(ssa=False)
    return validate_config(cfg)


def detect_file(path: Path, cfg: DetectorConfig, baseline: str | None) -> StreamResult:
    points = read_series(path)
    detector = NewmaDetector(ssa=cfg.ssa) if baseline == "newma" else MOCPDDetector(cfg)
    return run_stream(cfg, points, detector=detector)


def write_detect_outputs(out: Path, path: Path, cfg, baseline, result: StreamResult) -> None:
    atomic_write(out / "detections.csv", csv_text(
        ("index", "score", "threshold"),
        ((d.index, float(d.score), float(d.threshold_at)) for d in result.detections),
    ))
    atomic_write(out / "trace.csv", csv_text(
        ("index", "score", "threshold"),
        ((i, float(s), float(t)) for i, s, t in result.trace),
    ))
    write_json(out / "manifest.json", manifest(
        "detect", input=str(path), config=cfg.to_dict(), seed=cfg.seed,
        detector=baseline or "mocpd", detections=len(result.detections),
        scored_windows=len(result.trace), decision_timing=timing_stats(result.decision_ns),
        outputs=["detections.csv", "trace.csv"],
    ))


def _detect_job(job):
    path, cfg, baseline = job
    return detect_file(path, cfg, baseline)


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    src, out = Path(args.input), Path(args.out)
    if src.is_dir():
        files = sorted(p for p in src.glob("*.csv") if p.name != "truth.csv")
        if not files:
            raise CliError(f"{src}: no .csv series files", kind="missing_file")
        jobs = [(p, cfg, args.baseline) for p in files]
        workers = min(len(jobs), os.cpu_count() or 1, args.jobs or len(jobs))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_detect_job, jobs))
        else:
            results = [_detect_job(job) for job in jobs]
        for path, result in zip(files, results):
            write_detect_outputs(out / path.stem, path, cfg, args.baseline, result)
        write_json(out / "manifest.json", manifest(
            "detect", input=str(src), config=cfg.to_dict(), seed=cfg.seed,
            detector=args.baseline or "mocpd", files=[p.stem for p in files],
        ))
    else:
        write_detect_outputs(out, src, cfg, args.baseline, detect_file(src, cfg, args.baseline))
    return 0


# --------------------------------------------------------------------- evaluate


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.tolerance < 0:
        raise CliError("--tolerance must be >= 0")
    if args.beta <= 0:
        raise CliError("--beta must be > 0")
    dets = read_index_column(Path(args.detections), "index")
    truth = read_index_column(Path(args.truth), "cp_index")
    report = evaluate_corpus([(truth, dets)], args.tolerance, args.beta)
    out = Path(args.out)
    write_json(out, report.to_dict())
    write_json(out.with_name(out.stem + ".manifest.json"), manifest(
        "evaluate", detections=str(args.detections), truth=str(args.truth),
        tolerance=args.tolerance, beta=args.beta, outputs=[out.name],
    ))
    return 0


# ------------------------------------------------------------------------ main


class _Parser(argparse.ArgumentParser):
    """Routes usage errors through the JSON error path instead of exiting."""

    def error(self, message: str):
        raise CliError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mocpd", description="Memory-based online change-point detection")
    parser.add_argument("--version", action="version", version=f"mocpd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a labelled series")
    sim.add_argument("--kind", choices=("fl", "jm", "gm"), required=True)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--segments", type=int, default=49)
    sim.add_argument("--seg-len", type=int, default=500)
    sim.add_argument("--length", type=int, default=20_000, help="fl series length")
    sim.add_argument("--avg-rate", type=float, default=0.2,
                     help=f"average leak rate in gph (EPA groups: {LEAK_RATES})")
    sim.add_argument("--sigma", type=float, default=0.05, help="fl base noise std (gallons)")
    sim.add_argument("--trend", type=float, default=0.0, help="fl slow trend amplitude")
    sim.set_defaults(func=cmd_simulate)

    det = sub.add_parser("detect", help="run a detector over series.csv (or a directory of them)")
    det.add_argument("input")
    det.add_argument("--out", required=True, help="output directory")
    det.add_argument("--config", help="JSON file with DetectorConfig fields")
    det.add_argument("--window", type=int)
    det.add_argument("--memory", type=int)
    det.add_argument("--min-memory", type=int)
    det.add_argument("--buffer", type=int)
    det.add_argument("--stride", type=int)
    det.add_argument("--alpha", type=float)
    det.add_argument("--quantile", type=float)
    det.add_argument("--measure", choices=MEASURES)
    det.add_argument("--scheme", choices=SCHEMES)
    det.add_argument("--seed", type=int)
    det.add_argument("--tolerance", type=int)
    det.add_argument("--mmd-bandwidth", type=float)
    det.add_argument("--ssa-off", action="store_true")
    det.add_argument("--baseline", choices=("newma",))
    det.add_argument("--jobs", type=int, help="worker processes for directory input")
    det.set_defaults(func=cmd_detect)

    ev = sub.add_parser("evaluate", help="score detections against truth")
    ev.add_argument("--detections", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--tolerance", type=int, default=480)
    ev.add_argument("--beta", type=float, default=2.0)
    ev.add_argument("--out", required=True, help="report JSON path")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        err = {"error": exc.kind, "message": str(exc)}
    except ConfigError as exc:
        err = {"error": "invalid_config", "message": str(exc),
               "fields": exc.fields}
    except (OSError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(err), file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
