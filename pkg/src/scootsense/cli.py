"""Command-line interface.

Subcommands: replay, eval, imu, bench, render. Exit codes: 0 success,
1 evaluation/assertion failure, 2 I/O or malformed input, 3 stream
protocol violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .alerts import AlertConfig
from .dataset import load_annotation_file, load_manifest
from .detections import ReplayDetectionSource
from .errors import (
    CategoryError,
    ConfigError,
    EndOfStreamError,
    FormatError,
    OrderError,
    ParseError,
    PipelineError,
    ProtocolError,
)
from .evaluation import evaluate
from .fusion import FusionConfig

EXIT_OK = 0
EXIT_EVAL = 1
EXIT_IO = 2
EXIT_PROTOCOL = 3

_IO_ERRORS = (OSError, ParseError, FormatError, OrderError, ConfigError, CategoryError)
_PROTOCOL_ERRORS = (ProtocolError, EndOfStreamError)


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scootsense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("replay", help="run fusion + warnings over a recording")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--detections", type=Path, help="detection replay file (overrides manifest)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--threaded", action="store_true", help="run stages on a thread pipeline")
    p.add_argument("--threshold-m", type=float, default=4.0)
    p.add_argument("--clear-margin-m", type=float, default=0.5)
    p.add_argument("--min-consecutive", type=int, default=1)
    p.add_argument("--n-samples", type=int, default=24)
    p.add_argument("--trim-keep", type=float, default=0.5)

    p = sub.add_parser("eval", help="score a detection file against annotations")
    p.add_argument("--pred", required=True, type=Path, help="detections in replay format")
    p.add_argument("--gt", required=True, type=Path, help="annotation directory (integer stems)")
    p.add_argument("--img-size", type=_size, default=(640, 480))
    p.add_argument("--interp", choices=("allpoint", "101pt"), default="allpoint")
    p.add_argument("--out", type=Path, help="also write the text report here")
    p.add_argument("--json", type=Path, help="write the machine-readable report here")
    p.add_argument("--min-map50", type=float, help="exit 1 if the All mAP50 is below this")

    p = sub.add_parser("imu", help="vibration series + window metrics from an IMU log")
    p.add_argument("--log", required=True, type=Path)
    p.add_argument("--compare", type=Path, help="second log for side-by-side comparison")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--window-s", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=pipeline.ImuParams().alpha)
    p.add_argument("--kalman-q", type=float, default=pipeline.ImuParams().q)
    p.add_argument("--kalman-r", type=float, default=pipeline.ImuParams().r)

    p = sub.add_parser("bench", help="synthetic align+fuse+assess throughput benchmark")
    p.add_argument("--frames", type=int, default=1000)
    p.add_argument("--dets-per-frame", type=int, default=5)
    p.add_argument("--size", type=_size, default=(640, 480))
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("render", help="draw fused detections over the recording frames")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--fused", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--threshold-m", type=float, default=4.0)
    return parser


def _cmd_replay(args) -> int:
    cfg = pipeline.PipelineConfig(
        manifest_path=args.manifest,
        out_dir=args.out,
        detections_path=args.detections,
        fusion=FusionConfig(n_samples=args.n_samples, trim_keep=args.trim_keep, rng_seed=args.seed),
        alerts=AlertConfig(
            threshold_m=args.threshold_m,
            clear_margin_m=args.clear_margin_m,
            min_consecutive=args.min_consecutive,
        ),
        seed=args.seed,
        threaded=args.threaded,
    )
    summary = pipeline.run_replay(cfg)
    print(summary.describe())
    return EXIT_OK


def _cmd_eval(args) -> int:
    source = ReplayDetectionSource(args.pred)
    dets = source.all_detections()
    gts = []
    ann_files = sorted(Path(args.gt).glob("*.txt"))
    for path in ann_files:
        try:
            image_id = int(path.stem)
        except ValueError:
            raise ParseError("annotation file stems must be integers", path) from None
        gts.extend(load_annotation_file(path, args.img_size, image_id=image_id))
    report = evaluate(dets, gts, interpolation=args.interp, n_images=len(ann_files))
    text = report.render()
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.json:
        Path(args.json).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    if args.min_map50 is not None and report.all_row.ap50 < args.min_map50:
        print(f"FAIL: mAP50 {report.all_row.ap50:.4f} < {args.min_map50}", file=sys.stderr)
        return EXIT_EVAL
    return EXIT_OK


def _cmd_imu(args) -> int:
    params = pipeline.ImuParams(alpha=args.alpha, q=args.kalman_q, r=args.kalman_r)
    results = pipeline.run_imu(
        args.log, args.out, params=params, window_s=args.window_s, compare_path=args.compare
    )
    for stem, (points, windows) in results.items():
        peak = max((p.smoothed for p in points), default=0.0)
        print(f"{stem}: samples={len(points)} windows={len(windows)} peak={peak:.4g}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    summary = pipeline.run_bench(args.frames, args.dets_per_frame, size=args.size, seed=args.seed)
    print(summary.describe())
    return EXIT_OK


def _cmd_render(args) -> int:
    written = pipeline.run_render(args.manifest, args.fused, args.out, threshold_m=args.threshold_m)
    print(f"wrote {len(written)} frames to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "replay": _cmd_replay,
    "eval": _cmd_eval,
    "imu": _cmd_imu,
    "bench": _cmd_bench,
    "render": _cmd_render,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _PROTOCOL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
