"""Checkpoint inference to detection replay files.

Checkpoint contract: a TorchScript module mapping a float image tensor of
shape (1, 3, H, W), values in [0, 1], to a candidate tensor of shape
(N, 5 + C): center-format boxes (cx, cy, w, h) in input pixels, an
objectness score, and C per-class scores. C must match the shared category
map. Decoding multiplies objectness by the best class score, filters on
confidence, applies per-category NMS, and rescales boxes to the original
image pixels.

Output replay grammar (one line per detection, frames in input order):

    frame_id category_id confidence x1 y1 x2 y2

Inference runs under no_grad in eval mode with float32 CPU tensors, so a
fixed checkpoint, image set, and thresholds always produce byte-identical
files.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from PIL import Image

from .categories import load_category_map

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


class CheckpointError(RuntimeError):
    pass


class InputError(ValueError):
    pass


@dataclass(frozen=True)
class DumpJob:
    checkpoint: Path
    out_path: Path
    images_dir: Optional[Path] = None
    manifest: Optional[Path] = None
    categories_path: Optional[Path] = None
    conf_thresh: float = 0.25
    nms_iou: float = 0.45
    inference_size: tuple[int, int] = (640, 480)

    def __post_init__(self):
        if not 0.0 <= self.conf_thresh <= 1.0:
            raise InputError(f"conf_thresh {self.conf_thresh} outside [0, 1]")
        if not 0.0 <= self.nms_iou <= 1.0:
            raise InputError(f"nms_iou {self.nms_iou} outside [0, 1]")
        if (self.images_dir is None) == (self.manifest is None):
            raise InputError("exactly one of images_dir or manifest is required")


@dataclass(frozen=True)
class DumpSummary:
    frames: int
    detections: int
    decode_failures: int


def _frames_from_manifest(manifest: Path) -> list[tuple[int, Path]]:
    """Read `frame <id> <color> <depth> <t>` entries from a replay manifest."""
    frames = []
    root = manifest.parent
    for line in manifest.read_text(encoding="utf-8").splitlines():
        stripped = line.strip()
        if not stripped.startswith("frame "):
            continue
        parts = stripped.split()
        if len(parts) != 5:
            raise InputError(f"{manifest}: bad frame entry: {stripped!r}")
        frames.append((int(parts[1]), root / parts[2]))
    if not frames:
        raise InputError(f"{manifest}: no frame entries")
    return frames


def _frames_from_dir(images_dir: Path) -> list[tuple[int, Path]]:
    paths = sorted(p for p in images_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise InputError(f"{images_dir}: no images found")
    try:
        ids = [int(p.stem) for p in paths]
        order = sorted(range(len(paths)), key=lambda i: ids[i])
        return [(ids[i], paths[i]) for i in order]
    except ValueError:
        return list(enumerate(paths))


def _image_tensor(path: Path, size: tuple[int, int]) -> tuple[torch.Tensor, tuple[int, int]]:
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        original = rgb.size
        resized = rgb.resize(size, Image.BILINEAR)
    array = np.asarray(resized, dtype=np.float32) / 255.0
    tensor = torch.from_numpy(array.transpose(2, 0, 1)).unsqueeze(0)
    return tensor, original


def _nms_keep(boxes: np.ndarray, scores: np.ndarray, iou_thresh: float) -> list[int]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    kept: list[int] = []
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    for i in order:
        ok = True
        for j in kept:
            ix = min(boxes[i, 2], boxes[j, 2]) - max(boxes[i, 0], boxes[j, 0])
            iy = min(boxes[i, 3], boxes[j, 3]) - max(boxes[i, 1], boxes[j, 1])
            if ix <= 0 or iy <= 0:
                continue
            inter = ix * iy
            if inter / (areas[i] + areas[j] - inter) > iou_thresh:
                ok = False
                break
        if ok:
            kept.append(i)
    return kept


def decode_candidates(
    raw: np.ndarray,
    n_categories: int,
    conf_thresh: float,
    nms_iou: float,
    in_size: tuple[int, int],
    out_size: tuple[int, int],
) -> list[tuple[int, float, float, float, float, float]]:
    """Raw head output -> (category, conf, x1, y1, x2, y2) in original pixels."""
    if raw.ndim != 2 or raw.shape[1] != 5 + n_categories:
        raise CheckpointError(
            f"checkpoint emitted shape {raw.shape}, expected (N, {5 + n_categories}) "
            f"for {n_categories} categories"
        )
    if raw.shape[0] == 0:
        return []
    cls_scores = raw[:, 5:]
    cats = cls_scores.argmax(axis=1)
    confs = np.clip(raw[:, 4] * cls_scores.max(axis=1), 0.0, 1.0)
    cx, cy, w, h = raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3]
    boxes = np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=1)

    keep_mask = confs >= conf_thresh
    results = []
    for cat in sorted(set(cats[keep_mask].tolist())):
        members = np.where(keep_mask & (cats == cat))[0]
        kept = _nms_keep(boxes[members], confs[members], nms_iou)
        sx = out_size[0] / in_size[0]
        sy = out_size[1] / in_size[1]
        for local in kept:
            i = members[local]
            x1 = min(max(boxes[i, 0] * sx, 0.0), out_size[0])
            y1 = min(max(boxes[i, 1] * sy, 0.0), out_size[1])
            x2 = min(max(boxes[i, 2] * sx, 0.0), out_size[0])
            y2 = min(max(boxes[i, 3] * sy, 0.0), out_size[1])
            if x1 >= x2 or y1 >= y2:
                continue
            results.append((int(cat), float(confs[i]), float(x1), float(y1), float(x2), float(y2)))
    results.sort(key=lambda r: (-r[1], r[0]))
    return results


def dump_detections(job: DumpJob) -> DumpSummary:
    """Run the checkpoint over every frame and write the replay file."""
    if job.categories_path is not None:
        categories = load_category_map(job.categories_path)
    else:
        from .categories import DEFAULT_CATEGORIES

        categories = DEFAULT_CATEGORIES
    try:
        model = torch.jit.load(str(job.checkpoint), map_location="cpu")
    except Exception as exc:
        raise CheckpointError(f"cannot load checkpoint {job.checkpoint}: {exc}") from exc
    model.eval()

    frames = (
        _frames_from_manifest(job.manifest)
        if job.manifest is not None
        else _frames_from_dir(job.images_dir)
    )

    lines: list[str] = []
    n_dets = 0
    failures = 0
    with torch.no_grad():
        for frame_id, path in frames:
            try:
                tensor, original = _image_tensor(path, job.inference_size)
            except Exception as exc:
                print(f"warning: skipping {path}: {exc}", file=sys.stderr)
                failures += 1
                continue
            raw = model(tensor)
            if isinstance(raw, (tuple, list)):
                raw = raw[0]
            candidates = decode_candidates(
                raw.detach().cpu().numpy().astype(np.float64),
                len(categories),
                job.conf_thresh,
                job.nms_iou,
                job.inference_size,
                original,
            )
            for cat, conf, x1, y1, x2, y2 in candidates:
                lines.append(f"{frame_id} {cat} {conf:.6f} {x1:.2f} {y1:.2f} {x2:.2f} {y2:.2f}")
            n_dets += len(candidates)
    out = Path(job.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return DumpSummary(frames=len(frames) - failures, detections=n_dets, decode_failures=failures)
