"""On-disk formats: annotations, depth/color frames, IMU logs, calibration,
replay manifests, the category map, and the deterministic dataset split.

Annotation files use the normalized-center text format (one file per image,
lines `category_id xc yc w h`, all in [0, 1]). Depth frames are 16-bit
single-channel PNGs in raw device units (default scale 0.001 m/unit, raw 0
means no return). Calibration and manifests are plain `key = value` text so
recordings stay human-diffable.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from PIL import Image

from .detections import BBox, CATEGORY_NAMES
from .errors import (
    CategoryError,
    ConfigError,
    FormatError,
    OrderError,
    ParseError,
    RangeError,
)
from .evaluation import GroundTruthBox
from .geometry import DepthFrame, Extrinsics, Intrinsics
from .imu import AccelSample

DEFAULT_DEPTH_SCALE = 0.001

SizeLike = Union[tuple[int, int], Mapping[str, tuple[int, int]]]


def _size_for(image_sizes: SizeLike, image_id: str) -> tuple[int, int]:
    if isinstance(image_sizes, Mapping):
        try:
            return image_sizes[image_id]
        except KeyError:
            raise ConfigError(f"no image size known for {image_id!r}") from None
    return image_sizes


def load_annotations(directory, image_sizes: SizeLike) -> list[GroundTruthBox]:
    """Load every *.txt annotation file in a directory (file stem = image id)."""
    boxes: list[GroundTruthBox] = []
    for path in sorted(Path(directory).glob("*.txt")):
        boxes.extend(load_annotation_file(path, _size_for(image_sizes, path.stem)))
    return boxes


def load_annotation_file(path, size: tuple[int, int], image_id: Optional[str] = None) -> list[GroundTruthBox]:
    path = Path(path)
    if image_id is None:
        image_id = path.stem
    width, height = size
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 5:
                raise ParseError(f"expected 5 fields, got {len(parts)}", path, line_no)
            try:
                cat = int(parts[0])
                xc, yc, w, h = (float(p) for p in parts[1:])
            except ValueError as exc:
                raise ParseError(f"bad field: {exc}", path, line_no) from None
            if not 0 <= cat < len(CATEGORY_NAMES):
                raise CategoryError(f"{path}:{line_no}: category id {cat} outside 0..{len(CATEGORY_NAMES) - 1}")
            for value in (xc, yc, w, h):
                if not 0.0 <= value <= 1.0:
                    raise RangeError(f"normalized coordinate {value} outside [0, 1]", path, line_no)
            x1 = max((xc - w / 2.0) * width, 0.0)
            y1 = max((yc - h / 2.0) * height, 0.0)
            x2 = min((xc + w / 2.0) * width, float(width))
            y2 = min((yc + h / 2.0) * height, float(height))
            if x1 >= x2 or y1 >= y2:
                raise ParseError(f"zero-area box after clamping: {stripped!r}", path, line_no)
            boxes.append(GroundTruthBox(image_id=image_id, bbox=BBox(x1, y1, x2, y2), category=cat))
    return boxes


def save_annotation_file(path, boxes: Sequence[GroundTruthBox], size: tuple[int, int]) -> None:
    """Write boxes for one image in the normalized-center format."""
    width, height = size
    lines = []
    for gt in boxes:
        b = gt.bbox
        xc = (b.x1 + b.x2) / 2.0 / width
        yc = (b.y1 + b.y2) / 2.0 / height
        w = b.width / width
        h = b.height / height
        lines.append(f"{gt.category} {xc:.6f} {yc:.6f} {w:.6f} {h:.6f}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


_16BIT_MODES = ("I;16", "I;16L", "I;16B", "I")


def load_depth_frame(path, depth_scale: float = DEFAULT_DEPTH_SCALE, frame_id: Optional[int] = None) -> DepthFrame:
    """Load a 16-bit single-channel image as a DepthFrame, raw values bit-exact."""
    with Image.open(path) as img:
        if img.mode not in _16BIT_MODES:
            raise FormatError(f"{path}: expected 16-bit single-channel image, got mode {img.mode!r}")
        values = np.asarray(img)
    if values.ndim != 2:
        raise FormatError(f"{path}: expected a single channel, got shape {values.shape}")
    if values.dtype != np.uint16:
        if values.min() < 0 or values.max() > 65535:
            raise FormatError(f"{path}: pixel values exceed 16-bit range")
        values = values.astype(np.uint16)
    return DepthFrame(
        width=values.shape[1],
        height=values.shape[0],
        values=values,
        depth_scale=depth_scale,
        frame_id=frame_id,
    )


def save_depth_frame(path, frame: DepthFrame) -> None:
    Image.fromarray(frame.values).save(path)


def load_imu_log(path) -> list[AccelSample]:
    """Read a `t,ax,ay,az` CSV (header required, t strictly increasing)."""
    samples: list[AccelSample] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if [c.strip() for c in header] != ["t", "ax", "ay", "az"]:
            raise ParseError(f"expected header t,ax,ay,az, got {header}", path, 1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 columns, got {len(row)}", path, line_no)
            try:
                t, ax, ay, az = (float(v) for v in row)
            except ValueError as exc:
                raise ParseError(f"bad value: {exc}", path, line_no) from None
            if not all(math.isfinite(v) for v in (t, ax, ay, az)):
                raise ParseError("non-finite value", path, line_no)
            if samples and t <= samples[-1].t:
                raise OrderError(f"{path}:{line_no}: timestamp {t} not after {samples[-1].t}")
            samples.append(AccelSample(t=t, ax=ax, ay=ay, az=az))
    return samples


def save_imu_log(path, samples: Sequence[AccelSample]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "ax", "ay", "az"])
        for s in samples:
            writer.writerow([f"{s.t:g}", f"{s.ax:g}", f"{s.ay:g}", f"{s.az:g}"])


def split_dataset(
    image_ids: Sequence, ratios: tuple[float, float, float], seed: int
) -> tuple[list, list, list]:
    """Deterministic seeded shuffle, then split at rounded cumulative ratios.

    For 3427 ids at 7:2:1 this yields 2399/685/343.
    """
    if any(r <= 0.0 for r in ratios):
        raise ConfigError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {ratios} (sum {sum(ratios)})")
    shuffled = list(image_ids)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    b1 = int(math.floor(n * ratios[0] + 0.5))
    b2 = int(math.floor(n * (ratios[0] + ratios[1]) + 0.5))
    return shuffled[:b1], shuffled[b1:b2], shuffled[b2:]


def load_category_map(path, expected: Sequence[str] = CATEGORY_NAMES) -> tuple[str, ...]:
    """Read an `id name` category map file; ids must be exactly 0..n-1.

    When `expected` is given (the default), the file must agree with the
    built-in map; pass expected=None to load arbitrary maps.
    """
    entries: dict[int, str] = {}
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise ParseError(f"expected `id name`, got {stripped!r}", path, line_no)
            try:
                cat = int(parts[0])
            except ValueError:
                raise ParseError(f"bad category id {parts[0]!r}", path, line_no) from None
            if cat in entries:
                raise ParseError(f"duplicate category id {cat}", path, line_no)
            entries[cat] = parts[1]
    names = tuple(entries.get(i) for i in range(len(entries)))
    if any(n is None for n in names):
        raise CategoryError(f"{path}: ids are not contiguous from 0")
    if expected is not None and names != tuple(expected):
        raise CategoryError(f"{path}: map {names} does not match expected {tuple(expected)}")
    return names


@dataclass(frozen=True)
class Calibration:
    depth: Intrinsics
    color: Intrinsics
    depth_to_color: Extrinsics
    depth_scale: float = DEFAULT_DEPTH_SCALE


def _parse_kv_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError(f"expected `key = value`, got {stripped!r}", path, line_no)
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
    return values


def _intrinsics_from(values: dict[str, str], prefix: str, path) -> Intrinsics:
    def get(name: str) -> str:
        key = f"{prefix}.{name}"
        if key not in values:
            raise ParseError(f"missing key {key!r}", path)
        return values[key]

    return Intrinsics(
        width=int(get("width")),
        height=int(get("height")),
        fx=float(get("fx")),
        fy=float(get("fy")),
        cx=float(get("cx")),
        cy=float(get("cy")),
    )


def load_calibration(path) -> Calibration:
    """Parse the plain-text calibration file (depth/color intrinsics + extrinsics)."""
    path = Path(path)
    values = _parse_kv_file(path)
    depth = _intrinsics_from(values, "depth", path)
    color = _intrinsics_from(values, "color", path)
    if "depth_to_color" not in values:
        raise ParseError("missing key 'depth_to_color'", path)
    numbers = values["depth_to_color"].split()
    if len(numbers) != 12:
        raise ParseError(f"depth_to_color needs 12 numbers, got {len(numbers)}", path)
    floats = [float(x) for x in numbers]
    extr = Extrinsics(
        rotation=np.array(floats[:9], dtype=np.float64).reshape(3, 3),
        translation=np.array(floats[9:], dtype=np.float64),
    )
    depth_scale = float(values.get("depth_scale", DEFAULT_DEPTH_SCALE))
    return Calibration(depth=depth, color=color, depth_to_color=extr, depth_scale=depth_scale)


def save_calibration(path, calib: Calibration) -> None:
    lines = []
    for prefix, intr in (("depth", calib.depth), ("color", calib.color)):
        lines.append(f"{prefix}.width = {intr.width}")
        lines.append(f"{prefix}.height = {intr.height}")
        lines.append(f"{prefix}.fx = {intr.fx:.9g}")
        lines.append(f"{prefix}.fy = {intr.fy:.9g}")
        lines.append(f"{prefix}.cx = {intr.cx:.9g}")
        lines.append(f"{prefix}.cy = {intr.cy:.9g}")
    nums = [f"{x:.17g}" for x in calib.depth_to_color.rotation.ravel()]
    nums += [f"{x:.17g}" for x in calib.depth_to_color.translation]
    lines.append("depth_to_color = " + " ".join(nums))
    lines.append(f"depth_scale = {calib.depth_scale:.9g}")
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


@dataclass(frozen=True)
class FrameEntry:
    frame_id: int
    color_path: Path
    depth_path: Path
    timestamp: float


@dataclass(frozen=True)
class ReplayManifest:
    """Ordered recording index binding color, depth, and optional side streams."""

    frames: tuple[FrameEntry, ...]
    calibration_path: Path
    detections_path: Optional[Path] = None
    imu_path: Optional[Path] = None
    aligned: bool = False
    root: Path = field(default_factory=Path)

    def calibration(self) -> Calibration:
        return load_calibration(self.calibration_path)


def load_manifest(path) -> ReplayManifest:
    """Parse a replay manifest; every referenced file must exist."""
    path = Path(path)
    root = path.parent
    calibration_path: Optional[Path] = None
    detections_path: Optional[Path] = None
    imu_path: Optional[Path] = None
    aligned = False
    frames: list[FrameEntry] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("frame "):
                parts = stripped.split()
                if len(parts) != 5:
                    raise ParseError(f"frame entry needs 5 fields, got {len(parts)}", path, line_no)
                try:
                    frame_id = int(parts[1])
                    timestamp = float(parts[4])
                except ValueError as exc:
                    raise ParseError(f"bad frame entry: {exc}", path, line_no) from None
                if frames and frame_id <= frames[-1].frame_id:
                    raise OrderError(f"{path}:{line_no}: frame id {frame_id} not after {frames[-1].frame_id}")
                frames.append(
                    FrameEntry(
                        frame_id=frame_id,
                        color_path=root / parts[2],
                        depth_path=root / parts[3],
                        timestamp=timestamp,
                    )
                )
                continue
            if "=" not in stripped:
                raise ParseError(f"expected `key = value` or frame entry, got {stripped!r}", path, line_no)
            key, _, value = stripped.partition("=")
            key, value = key.strip(), value.strip()
            if key == "calibration":
                calibration_path = root / value
            elif key == "detections":
                detections_path = root / value
            elif key == "imu":
                imu_path = root / value
            elif key == "aligned":
                if value not in ("true", "false"):
                    raise ParseError(f"aligned must be true or false, got {value!r}", path, line_no)
                aligned = value == "true"
            else:
                raise ParseError(f"unknown manifest key {key!r}", path, line_no)
    if calibration_path is None:
        raise ParseError("manifest has no calibration entry", path)
    for candidate in [calibration_path, detections_path, imu_path]:
        if candidate is not None and not candidate.exists():
            raise FileNotFoundError(f"{path}: referenced file missing: {candidate}")
    for entry in frames:
        for candidate in (entry.color_path, entry.depth_path):
            if not candidate.exists():
                raise FileNotFoundError(f"{path}: referenced file missing: {candidate}")
    return ReplayManifest(
        frames=tuple(frames),
        calibration_path=calibration_path,
        detections_path=detections_path,
        imu_path=imu_path,
        aligned=aligned,
        root=root,
    )
