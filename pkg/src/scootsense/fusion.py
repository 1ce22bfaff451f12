"""Robust distance estimation for detections from an aligned depth frame.

Depth around a bounding-box center is noisy (specular dropouts, edge bleed),
so the estimator samples the center pixel plus random points in a disc
scaled to the box, drops invalid (raw 0) returns, sorts the rest, and
averages only the central fraction of the sorted samples.

Sampling is deterministic: the stream seed is mixed with the frame id and
the detection index, so a frame's distances do not depend on how many
detections other frames had.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .detections import Detection
from .errors import ConfigError, OutOfBoundsError
from .geometry import DepthFrame

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class FusionConfig:
    """Sampling and trimming parameters for depth fusion."""

    n_samples: int = 24
    radius_frac: float = 0.15
    trim_keep: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0.0 < self.radius_frac <= 0.5:
            raise ConfigError(f"radius_frac must be in (0, 0.5], got {self.radius_frac}")
        if not 0.0 < self.trim_keep <= 1.0:
            raise ConfigError(f"trim_keep must be in (0, 1], got {self.trim_keep}")


@dataclass(frozen=True)
class FusedDetection:
    """A detection enriched with a distance estimate (absent if no valid depth)."""

    detection: Detection
    distance_m: Optional[float]
    valid_samples: int

    def __post_init__(self):
        if (self.distance_m is not None) != (self.valid_samples >= 1):
            raise ValueError("distance_m must be present exactly when valid samples exist")
        if self.distance_m is not None and not self.distance_m > 0.0:
            raise ValueError(f"distance_m must be > 0, got {self.distance_m}")


def detection_rng(rng_seed: int, frame_id: int, index: int) -> np.random.Generator:
    """Deterministic per-detection generator: stream seed mixed with frame and index."""
    seq = np.random.SeedSequence(rng_seed & _U64, spawn_key=(frame_id & _U64, index & _U64))
    return np.random.default_rng(seq)


def sample_points(
    bbox,
    cfg: FusionConfig,
    frame_size: tuple[int, int],
    rng: Optional[np.random.Generator] = None,
) -> list[tuple[int, int]]:
    """Center pixel first, then n_samples-1 uniform draws from a disc around it.

    The disc radius is radius_frac * min(box width, height); every point is
    clamped to the pixels covered by both the box and the frame.
    """
    fw, fh = frame_size
    u_lo = max(0, int(math.floor(bbox.x1)))
    u_hi = min(fw - 1, int(math.ceil(bbox.x2)) - 1)
    v_lo = max(0, int(math.floor(bbox.y1)))
    v_hi = min(fh - 1, int(math.ceil(bbox.y2)) - 1)
    if u_lo > u_hi or v_lo > v_hi:
        raise OutOfBoundsError(f"bbox {bbox} does not cover any pixel of a {fw}x{fh} frame")

    cu, cv = bbox.center()
    points = [(min(max(int(cu), u_lo), u_hi), min(max(int(cv), v_lo), v_hi))]
    if cfg.n_samples == 1:
        return points

    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed & _U64))
    radius = cfg.radius_frac * min(bbox.width, bbox.height)
    for _ in range(cfg.n_samples - 1):
        r = radius * math.sqrt(rng.random())
        theta = 2.0 * math.pi * rng.random()
        u = int(math.floor(cu + r * math.cos(theta) + 0.5))
        v = int(math.floor(cv + r * math.sin(theta) + 0.5))
        points.append((min(max(u, u_lo), u_hi), min(max(v, v_lo), v_hi)))
    return points


def trimmed_mean_raw(raws: Sequence[int], trim_keep: float) -> Optional[float]:
    """Average of the central trim_keep fraction of the sorted nonzero raws."""
    if not 0.0 < trim_keep <= 1.0:
        raise ConfigError(f"trim_keep must be in (0, 1], got {trim_keep}")
    valid = sorted(r for r in raws if r != 0)
    k = len(valid)
    if k == 0:
        return None
    drop = int(math.floor(k * (1.0 - trim_keep) / 2.0))
    kept = valid[drop : k - drop]
    return sum(kept) / len(kept)


def robust_depth(depth: DepthFrame, points: Sequence[tuple[int, int]], trim_keep: float) -> Optional[float]:
    """Trimmed-mean depth in meters at the given pixels; None when no valid return."""
    raws = []
    for u, v in points:
        if not (0 <= u < depth.width and 0 <= v < depth.height):
            raise OutOfBoundsError(f"sample point ({u}, {v}) outside {depth.width}x{depth.height}")
        raws.append(int(depth.values[v, u]))
    mean_raw = trimmed_mean_raw(raws, trim_keep)
    if mean_raw is None:
        return None
    return mean_raw * depth.depth_scale


def fuse(detections: Sequence[Detection], depth: DepthFrame, cfg: FusionConfig) -> list[FusedDetection]:
    """Attach a distance estimate to each detection, order preserved."""
    out: list[FusedDetection] = []
    frame_size = (depth.width, depth.height)
    for index, det in enumerate(detections):
        frame_id = det.frame_id if det.frame_id is not None else (depth.frame_id or 0)
        rng = detection_rng(cfg.rng_seed, frame_id, index)
        points = sample_points(det.bbox, cfg, frame_size, rng=rng)
        raws = [int(depth.values[v, u]) for u, v in points]
        valid = sum(1 for r in raws if r != 0)
        mean_raw = trimmed_mean_raw(raws, cfg.trim_keep)
        distance = None if mean_raw is None else mean_raw * depth.depth_scale
        out.append(FusedDetection(detection=det, distance_m=distance, valid_samples=valid))
    return out
