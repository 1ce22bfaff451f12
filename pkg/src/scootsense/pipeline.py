"""Streaming composition of the pipeline plus the bench, IMU, and render runs.

The replay pipeline processes manifest frames in order:
load depth -> align (unless the recording is pre-aligned) -> fetch
detections -> fuse -> assess, appending warning events and fused-detection
records to the output files. Stages can run single-threaded or on a small
bounded-queue thread pipeline; per-stream state (alerts) has exactly one
writer, so both modes produce byte-identical outputs for the same seed.

Output formats:
    events.txt  one warning per line: `frame_id category_id distance_m`
    fused.txt   one record per line:
                `frame_id category_id confidence x1 y1 x2 y2 distance_m valid_samples`
                (distance_m is `-` when no valid depth sample existed)
"""

from __future__ import annotations

import math
import queue
import statistics
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

import numpy as np
from PIL import Image, ImageDraw

from .alerts import AlertConfig, AlertState, assess, format_event
from .dataset import ReplayManifest, load_depth_frame, load_imu_log, load_manifest
from .detections import BBox, Detection, DetectionSource, ReplayDetectionSource, category_name
from .errors import ConfigError
from .fusion import FusionConfig, FusedDetection, fuse
from .geometry import DepthFrame, Extrinsics, Intrinsics, align_depth_to_color
from .imu import (
    DEFAULT_ALPHA,
    DEFAULT_MEASUREMENT_VAR,
    DEFAULT_PROCESS_VAR,
    VibrationProcessor,
    windowed_metrics,
)


@dataclass(frozen=True)
class ImuParams:
    alpha: float = DEFAULT_ALPHA
    q: float = DEFAULT_PROCESS_VAR
    r: float = DEFAULT_MEASUREMENT_VAR


@dataclass(frozen=True)
class PipelineConfig:
    manifest_path: Path
    out_dir: Path
    detections_path: Optional[Path] = None
    fusion: FusionConfig = field(default_factory=FusionConfig)
    alerts: AlertConfig = field(default_factory=AlertConfig)
    imu: ImuParams = field(default_factory=ImuParams)
    inference_size: tuple[int, int] = (640, 480)
    seed: int = 0
    threaded: bool = False

    def __post_init__(self):
        if self.inference_size[0] <= 0 or self.inference_size[1] <= 0:
            raise ConfigError(f"inference size must be positive, got {self.inference_size}")


@dataclass(frozen=True)
class RunSummary:
    frames: int
    warnings: int
    mean_ms: float
    median_ms: float
    p99_ms: float
    fps: float

    def describe(self) -> str:
        return (
            f"frames={self.frames} warnings={self.warnings} "
            f"latency mean={self.mean_ms:.3f}ms median={self.median_ms:.3f}ms "
            f"p99={self.p99_ms:.3f}ms fps={self.fps:.1f}"
        )


def _summary(latencies_s: list[float], warnings: int, wall_s: float) -> RunSummary:
    n = len(latencies_s)
    if n == 0:
        return RunSummary(frames=0, warnings=warnings, mean_ms=0.0, median_ms=0.0, p99_ms=0.0, fps=0.0)
    ordered = sorted(latencies_s)
    p99 = ordered[min(n - 1, math.ceil(0.99 * n) - 1)]
    return RunSummary(
        frames=n,
        warnings=warnings,
        mean_ms=1e3 * sum(latencies_s) / n,
        median_ms=1e3 * statistics.median(latencies_s),
        p99_ms=1e3 * p99,
        fps=n / wall_s if wall_s > 0 else 0.0,
    )


def format_fused_record(frame_id: int, fd: FusedDetection) -> str:
    det = fd.detection
    b = det.bbox
    dist = "-" if fd.distance_m is None else f"{fd.distance_m:g}"
    return (
        f"{frame_id} {det.category} {det.confidence:g} "
        f"{b.x1:g} {b.y1:g} {b.x2:g} {b.y2:g} {dist} {fd.valid_samples}"
    )


class _ThreadStage:
    """Runs fn over an iterator in its own thread, preserving order."""

    def __init__(self, source: Iterable, fn: Callable, maxsize: int = 8):
        self._q: queue.Queue = queue.Queue(maxsize)
        self._thread = threading.Thread(target=self._run, args=(source, fn), daemon=True)
        self._thread.start()

    def _run(self, source, fn):
        try:
            for item in source:
                self._q.put(("item", fn(item)))
            self._q.put(("end", None))
        except BaseException as exc:  # forwarded to the consumer
            self._q.put(("error", exc))

    def __iter__(self):
        while True:
            kind, payload = self._q.get()
            if kind == "item":
                yield payload
            elif kind == "end":
                return
            else:
                raise payload


def _timed(fn: Callable) -> Callable:
    """Wrap a stage fn so each payload accumulates its busy time."""

    def wrapper(item):
        payload, busy = item
        start = time.perf_counter()
        result = fn(payload)
        return result, busy + (time.perf_counter() - start)

    return wrapper


def run_replay(cfg: PipelineConfig) -> RunSummary:
    """Replay a recording: fuse detections with depth and emit warnings."""
    manifest = load_manifest(cfg.manifest_path)
    calib = manifest.calibration()
    detections_path = cfg.detections_path or manifest.detections_path
    if detections_path is None:
        raise ConfigError("no detection replay file: pass one or add it to the manifest")
    fusion_cfg = replace(cfg.fusion, rng_seed=cfg.seed)

    source = ReplayDetectionSource(detections_path)

    def load_stage(entry):
        depth = load_depth_frame(entry.depth_path, calib.depth_scale, frame_id=entry.frame_id)
        if not manifest.aligned:
            depth = align_depth_to_color(depth, calib.depth, calib.color, calib.depth_to_color)
        dets = source.next_detections(entry.frame_id)
        return entry.frame_id, depth, dets

    def fuse_stage(item):
        frame_id, depth, dets = item
        return frame_id, fuse(dets, depth, fusion_cfg)

    seed_items = ((entry, 0.0) for entry in manifest.frames)
    if cfg.threaded:
        stage1 = _ThreadStage(seed_items, _timed(load_stage))
        stage2 = _ThreadStage(stage1, _timed(fuse_stage))
        stream: Iterable = stage2
    else:
        stream = map(_timed(fuse_stage), map(_timed(load_stage), seed_items))

    event_lines: list[str] = []
    fused_lines: list[str] = []
    latencies: list[float] = []
    state = AlertState()
    wall_start = time.perf_counter()
    for (frame_id, fused), busy in stream:
        start = time.perf_counter()
        events, state = assess(fused, cfg.alerts, state, frame_id=frame_id)
        for fd in fused:
            fused_lines.append(format_fused_record(frame_id, fd))
        for event in events:
            event_lines.append(format_event(event))
        latencies.append(busy + (time.perf_counter() - start))
    wall = time.perf_counter() - wall_start

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "events.txt").write_text("".join(line + "\n" for line in event_lines), encoding="utf-8")
    (out_dir / "fused.txt").write_text("".join(line + "\n" for line in fused_lines), encoding="utf-8")
    return _summary(latencies, warnings=len(event_lines), wall_s=wall)


def _bench_scene(size: tuple[int, int], seed: int):
    """Synthetic calibration and depth raster with realistic structure."""
    width, height = size
    rng = np.random.default_rng(seed)
    depth_intr = Intrinsics(width=width, height=height, fx=0.95 * width, fy=0.95 * width, cx=width / 2, cy=height / 2)
    color_intr = Intrinsics(
        width=width, height=height, fx=0.97 * width, fy=0.97 * width, cx=width / 2 - 0.5, cy=height / 2 - 0.5
    )
    angle = math.radians(0.5)
    rotation = np.array(
        [
            [math.cos(angle), 0.0, math.sin(angle)],
            [0.0, 1.0, 0.0],
            [-math.sin(angle), 0.0, math.cos(angle)],
        ]
    )
    extr = Extrinsics(rotation=rotation, translation=np.array([0.015, 0.0, 0.0]))
    values = rng.integers(800, 6000, size=(height, width)).astype(np.uint16)
    values[rng.random((height, width)) < 0.08] = 0  # realistic dropout holes
    depth = DepthFrame(width=width, height=height, values=values, depth_scale=0.001)
    return depth, depth_intr, color_intr, extr


def _bench_detections(size: tuple[int, int], per_frame: int, frames: int, seed: int) -> list[list[Detection]]:
    width, height = size
    rng = np.random.default_rng(seed + 1)
    all_frames = []
    for frame_id in range(frames):
        dets = []
        for _ in range(per_frame):
            w = rng.uniform(0.1 * width, 0.3 * width)
            h = rng.uniform(0.1 * height, 0.3 * height)
            x1 = rng.uniform(0, width - w)
            y1 = rng.uniform(0, height - h)
            dets.append(
                Detection(
                    bbox=BBox(x1, y1, x1 + w, y1 + h),
                    category=int(rng.integers(0, 6)),
                    confidence=float(rng.uniform(0.3, 1.0)),
                    frame_id=frame_id,
                )
            )
        all_frames.append(dets)
    return all_frames


def run_bench(
    frames: int,
    dets_per_frame: int,
    size: tuple[int, int] = (640, 480),
    seed: int = 0,
    fusion: Optional[FusionConfig] = None,
    alerts: Optional[AlertConfig] = None,
) -> RunSummary:
    """Throughput benchmark of align + fuse + assess on synthetic frames.

    No disk access and no model inference: the measurement isolates the
    pipeline's own per-frame overhead. Single-threaded.
    """
    if size[0] <= 0 or size[1] <= 0:
        raise ConfigError(f"size must be positive, got {size}")
    fusion = fusion or FusionConfig(rng_seed=seed)
    alerts = alerts or AlertConfig()
    depth, depth_intr, color_intr, extr = _bench_scene(size, seed)
    det_frames = _bench_detections(size, dets_per_frame, max(frames, 1), seed)

    # Warm-up outside the timed region (JIT compile, cache fill).
    aligned = align_depth_to_color(depth, depth_intr, color_intr, extr)
    fused = fuse(det_frames[0], aligned, fusion)
    assess(fused, alerts, AlertState(), frame_id=0)

    latencies: list[float] = []
    warnings = 0
    state = AlertState()
    wall_start = time.perf_counter()
    for frame_id in range(frames):
        start = time.perf_counter()
        frame = DepthFrame(depth.width, depth.height, depth.values, depth.depth_scale, frame_id=frame_id)
        aligned = align_depth_to_color(frame, depth_intr, color_intr, extr)
        fused = fuse(det_frames[frame_id], aligned, fusion)
        events, state = assess(fused, alerts, state, frame_id=frame_id)
        warnings += len(events)
        latencies.append(time.perf_counter() - start)
    wall = time.perf_counter() - wall_start
    return _summary(latencies, warnings=warnings, wall_s=wall)


def run_imu(
    log_path,
    out_dir,
    params: ImuParams = ImuParams(),
    window_s: float = 1.0,
    compare_path=None,
):
    """Process one or two IMU logs into vibration series and window metrics.

    Writes `<stem>_series.csv` (t, raw, smoothed) and `<stem>_windows.txt`
    per log, plus `comparison.txt` when two logs are given. Returns the
    per-log (points, windows) results keyed by stem.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    paths = [Path(log_path)] + ([Path(compare_path)] if compare_path else [])
    for path in paths:
        samples = load_imu_log(path)
        processor = VibrationProcessor(alpha=params.alpha, q=params.q, r=params.r)
        points = list(processor.process_stream(samples))
        windows = windowed_metrics(points, window_s)
        stem = path.stem
        series_lines = ["t,raw,smoothed"]
        series_lines += [f"{p.t:.9g},{p.raw:.9g},{p.smoothed:.9g}" for p in points]
        (out_dir / f"{stem}_series.csv").write_text(
            "".join(line + "\n" for line in series_lines), encoding="utf-8"
        )
        window_lines = ["t_start t_end peak rms"]
        window_lines += [
            f"{w['t_start']:.9g} {w['t_end']:.9g} {w['peak']:.9g} {w['rms']:.9g}" for w in windows
        ]
        (out_dir / f"{stem}_windows.txt").write_text(
            "".join(line + "\n" for line in window_lines), encoding="utf-8"
        )
        results[stem] = (points, windows)
    if compare_path:
        lines = []
        overall = {}
        for stem, (points, _) in results.items():
            peak = max((p.smoothed for p in points), default=0.0)
            rms = math.sqrt(sum(p.smoothed**2 for p in points) / len(points)) if points else 0.0
            overall[stem] = (peak, rms)
            lines.append(f"{stem}: peak={peak:.6g} rms={rms:.6g}")
        stems = list(overall)
        stronger = max(stems, key=lambda s: overall[s][0])
        lines.append(f"stronger_vibration: {stronger}")
        (out_dir / "comparison.txt").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return results


def _parse_fused_file(path) -> dict[int, list[tuple]]:
    by_frame: dict[int, list[tuple]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            frame_id = int(parts[0])
            cat = int(parts[1])
            conf = float(parts[2])
            coords = tuple(float(p) for p in parts[3:7])
            dist = None if parts[7] == "-" else float(parts[7])
            by_frame.setdefault(frame_id, []).append((cat, conf, coords, dist))
    return by_frame


def run_render(manifest_path, fused_path, out_dir, threshold_m: float = 4.0) -> list[Path]:
    """Draw fused detections onto the recording's color frames.

    Boxes carry category, confidence, and distance; a red banner tops any
    frame with a detection at or inside the warning threshold.
    """
    manifest = load_manifest(manifest_path)
    by_frame = _parse_fused_file(fused_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for entry in manifest.frames:
        records = by_frame.get(entry.frame_id, [])
        with Image.open(entry.color_path) as img:
            canvas = img.convert("RGB")
        draw = ImageDraw.Draw(canvas)
        banner = None
        for cat, conf, (x1, y1, x2, y2), dist in records:
            warned = dist is not None and dist <= threshold_m
            color = (220, 40, 40) if warned else (40, 200, 70)
            draw.rectangle([x1, y1, x2, y2], outline=color, width=2)
            label = f"{category_name(cat)} {conf:.2f}"
            label += f" {dist:.2f} m" if dist is not None else " (no depth)"
            draw.text((x1 + 3, max(y1 - 12, 1)), label, fill=color)
            if warned and (banner is None or dist < banner[1]):
                banner = (cat, dist)
        if banner is not None:
            cat, dist = banner
            draw.rectangle([0, 0, canvas.width, 22], fill=(180, 20, 20))
            draw.text((6, 5), f"WARNING: {category_name(cat)} {dist:.1f} m ahead", fill=(255, 255, 255))
        path = out_dir / f"frame_{entry.frame_id:06d}.png"
        canvas.save(path)
        written.append(path)
    return written
