"""Command-line interface for the dumper.

Exit codes: 0 success, 2 unloadable checkpoint or I/O problem. Image decode
failures do not abort a dump: the frame is skipped with a warning and
counted in the summary.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .categories import CategoryMapError, load_category_map
from .convert import ExportError, convert_label_studio_export
from .dump import CheckpointError, DumpJob, InputError, dump_detections

EXIT_OK = 0
EXIT_IO = 2


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scootsense-dump", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detections", help="run a checkpoint and write a replay file")
    p.add_argument("--checkpoint", required=True, type=Path)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--images", type=Path, help="directory of frames")
    group.add_argument("--manifest", type=Path, help="replay manifest (color frames are used)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--categories", type=Path, help="shared category map file")
    p.add_argument("--conf", type=float, default=0.25)
    p.add_argument("--iou", type=float, default=0.45)
    p.add_argument("--size", type=_size, default=(640, 480))

    p = sub.add_parser("convert-annotations", help="Label Studio JSON -> annotation files")
    p.add_argument("--export", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--categories", type=Path, help="shared category map file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "detections":
            job = DumpJob(
                checkpoint=args.checkpoint,
                out_path=args.out,
                images_dir=args.images,
                manifest=args.manifest,
                categories_path=args.categories,
                conf_thresh=args.conf,
                nms_iou=args.iou,
                inference_size=args.size,
            )
            summary = dump_detections(job)
            print(
                f"frames={summary.frames} detections={summary.detections} "
                f"decode_failures={summary.decode_failures}"
            )
        else:
            if args.categories is not None:
                categories = load_category_map(args.categories)
            else:
                from .categories import DEFAULT_CATEGORIES as categories
            written = convert_label_studio_export(args.export, args.out, categories)
            print(f"images={len(written)} boxes={sum(written.values())}")
        return EXIT_OK
    except (CheckpointError, InputError, ExportError, CategoryMapError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
