from pathlib import Path

import numpy as np
import pytest
import torch
from PIL import Image

REPO_ROOT = Path(__file__).resolve().parents[2]
PRIMARY_FIXTURES = REPO_ROOT / "tests" / "fixtures"


class TinyDetector(torch.nn.Module):
    """Brightness-sensitive stand-in for a trained single-stage detector.

    Emits four candidates in (cx, cy, w, h, obj, 6 class scores) layout:
    a confident pothole, a heavily-overlapping weaker pothole (NMS fodder),
    a mid-confidence pine cone, and a below-threshold reject.
    """

    def forward(self, x):
        b = x.mean().clamp(0.0, 1.0)
        one = torch.ones(())
        z = torch.zeros(())

        def row(cx, cy, w, h, obj, scores):
            return torch.stack([cx * one, cy * one, w * one, h * one, obj] + scores)

        pothole = [z, z, z, 0.8 * one + 0.2 * b, z, z]
        pothole_dup = [z, z, z, 0.7 * one, z, z]
        pine = [z, z, 0.6 * one + 0.1 * b, z, z, z]
        reject = [z, z, z, 0.9 * one, z, z]
        return torch.stack(
            [
                row(320.0, 240.0, 120.0, 90.0, 0.95 * one, pothole),
                row(328.0, 244.0, 120.0, 90.0, 0.90 * one, pothole_dup),
                row(100.0, 100.0, 60.0, 40.0, 0.80 * one, pine),
                row(500.0, 300.0, 40.0, 40.0, 0.10 * one, reject),
            ]
        )


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("ckpt") / "tiny.torchscript.pt"
    model = TinyDetector().eval()
    example = torch.zeros(1, 3, 480, 640)
    traced = torch.jit.trace(model, example)
    traced.save(str(path))
    return path


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory) -> Path:
    directory = tmp_path_factory.mktemp("frames")
    rng = np.random.default_rng(5)
    for i in range(3):
        shade = 60 + 70 * i
        array = rng.integers(shade, shade + 40, size=(480, 640, 3)).astype(np.uint8)
        Image.fromarray(array).save(directory / f"{i}.png")
    return directory


@pytest.fixture(scope="session")
def categories_file() -> Path:
    return PRIMARY_FIXTURES / "categories.txt"


@pytest.fixture(scope="session")
def replay_clip() -> Path:
    return PRIMARY_FIXTURES / "replay_clip"
