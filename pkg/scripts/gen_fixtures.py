#!/usr/bin/env python3
"""Regenerate the checked-in test fixtures (deterministic).

The replay clip is three 640x480 frames with constant-depth planes at
6.0, 4.0, and 3.0 m and one pothole detection per frame. The calibration
uses a pure 0.02 m x-translation, chosen so the alignment shift is an
integer pixel count at each plane depth and trimmed-mean distances stay
exactly the plane values.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from scootsense.dataset import Calibration, save_calibration
from scootsense.geometry import Extrinsics, Intrinsics
from scootsense.imu import AccelSample
from scootsense.dataset import save_imu_log

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
CLIP = FIXTURES / "replay_clip"

WIDTH, HEIGHT = 640, 480
PLANES_MM = (6000, 4000, 3000)


def write_depth(path: Path, raw: int) -> None:
    values = np.full((HEIGHT, WIDTH), raw, dtype=np.uint16)
    Image.fromarray(values).save(path)


def write_color(path: Path, shade: int) -> None:
    column = np.linspace(40, 40 + shade, WIDTH, dtype=np.uint8)
    rgb = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
    rgb[..., 0] = column[None, :]
    rgb[..., 1] = 90
    rgb[..., 2] = 130
    Image.fromarray(rgb, mode="RGB").save(path)


def main() -> None:
    (CLIP / "depth").mkdir(parents=True, exist_ok=True)
    (CLIP / "color").mkdir(parents=True, exist_ok=True)

    intr = Intrinsics(width=WIDTH, height=HEIGHT, fx=600.0, fy=600.0, cx=320.0, cy=240.0)
    calib = Calibration(
        depth=intr,
        color=intr,
        depth_to_color=Extrinsics(rotation=np.eye(3), translation=np.array([0.02, 0.0, 0.0])),
        depth_scale=0.001,
    )
    save_calibration(CLIP / "calib.txt", calib)

    for i, raw in enumerate(PLANES_MM, start=1):
        write_depth(CLIP / "depth" / f"{i:06d}.png", raw)
        write_color(CLIP / "color" / f"{i:06d}.png", 40 * i)

    detections = [
        "1 3 0.92 280 300 360 380",
        "2 3 0.93 270 290 370 390",
        "3 3 0.95 260 280 380 400",
    ]
    (CLIP / "detections.txt").write_text("".join(line + "\n" for line in detections), encoding="utf-8")

    samples = [AccelSample(t=i * 0.01, ax=0.02, ay=4.905, az=8.496) for i in range(20)]
    save_imu_log(CLIP / "imu.csv", samples)

    manifest = [
        "calibration = calib.txt",
        "detections = detections.txt",
        "imu = imu.csv",
        "aligned = false",
    ]
    for i in range(1, len(PLANES_MM) + 1):
        manifest.append(f"frame {i} color/{i:06d}.png depth/{i:06d}.png {0.1 * i:.1f}")
    (CLIP / "manifest.txt").write_text("".join(line + "\n" for line in manifest), encoding="utf-8")

    categories = [
        "0 manhole_cover",
        "1 non_directional_crack",
        "2 pine_cone",
        "3 pothole",
        "4 tree_branch",
        "5 truncated_dome",
    ]
    (FIXTURES / "categories.txt").write_text("".join(line + "\n" for line in categories), encoding="utf-8")
    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
