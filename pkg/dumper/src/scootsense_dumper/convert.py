"""Label Studio JSON export -> normalized-center annotation files.

Label Studio rectangle results carry x, y (top-left), width, and height as
percentages of the original image. The pipeline's annotation format wants
one text file per image with `category_id xc yc w h` lines, everything
normalized to [0, 1]. Output files are named by the image stem with the
Label Studio upload hash prefix (`deadbeef-name.png`) stripped.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .categories import CategoryMapError

_UPLOAD_PREFIX = re.compile(r"^[0-9a-f]{8}-")


class ExportError(ValueError):
    pass


def _image_stem(task: dict) -> str:
    data = task.get("data", {})
    image = data.get("image") or data.get("img") or ""
    if not image:
        raise ExportError(f"task {task.get('id')} has no image reference")
    name = Path(str(image)).name
    return Path(_UPLOAD_PREFIX.sub("", name)).stem


def _iter_rectangles(task: dict):
    for annotation in task.get("annotations", []) or []:
        for result in annotation.get("result", []) or []:
            if result.get("type") != "rectanglelabels":
                continue
            yield result


def convert_label_studio_export(export_path, out_dir, categories) -> dict[str, int]:
    """Write one annotation file per exported image; returns boxes per stem."""
    export_path = Path(export_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = {name: i for i, name in enumerate(categories)}
    tasks = json.loads(export_path.read_text(encoding="utf-8"))
    if not isinstance(tasks, list):
        raise ExportError(f"{export_path}: expected a JSON list of tasks")
    written: dict[str, int] = {}
    for task in tasks:
        stem = _image_stem(task)
        lines = []
        for result in _iter_rectangles(task):
            value = result.get("value", {})
            labels = value.get("rectanglelabels") or []
            if not labels:
                continue
            label = labels[0]
            if label not in ids:
                raise CategoryMapError(f"{export_path}: unknown label {label!r}")
            x = float(value["x"]) / 100.0
            y = float(value["y"]) / 100.0
            w = float(value["width"]) / 100.0
            h = float(value["height"]) / 100.0
            xc = min(max(x + w / 2.0, 0.0), 1.0)
            yc = min(max(y + h / 2.0, 0.0), 1.0)
            w = min(max(w, 0.0), 1.0)
            h = min(max(h, 0.0), 1.0)
            lines.append(f"{ids[label]} {xc:.6f} {yc:.6f} {w:.6f} {h:.6f}")
        (out_dir / f"{stem}.txt").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        written[stem] = len(lines)
    return written
