"""Pinhole camera math and depth-to-color alignment.

Alignment reprojects every valid depth pixel through
deproject -> rigid transform -> project into the color camera, writing the
transformed depth at the rounded target pixel. Pixel collisions keep the
nearer surface; unmapped pixels stay 0 (the no-depth sentinel). Lens
distortion is not modeled: coefficients are accepted for forward
compatibility but must be zero.

The per-pixel loop is compiled with numba when available (needed for
real-time rates at 640x480); a numpy fallback implements the identical
float32 arithmetic so both paths produce bit-identical rasters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BehindCameraError, ConfigError, FormatError, InvalidDepthError, OutOfBoundsError

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay importable
    _HAVE_NUMBA = False

_F4 = np.float32
_ORTHO_TOL = 1e-9
_MAX_RAW = 65535


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    distortion: tuple[float, ...] = ()

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"frame size must be positive, got {self.width}x{self.height}")
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ConfigError(f"focal lengths must be > 0, got fx={self.fx} fy={self.fy}")
        if not (0.0 <= self.cx < self.width and 0.0 <= self.cy < self.height):
            raise ConfigError(f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height}")
        if any(c != 0.0 for c in self.distortion):
            raise ConfigError("nonzero distortion coefficients are not supported")


@dataclass(frozen=True)
class Extrinsics:
    """Rigid transform: point_dst = rotation @ point_src + translation (meters)."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        if not np.allclose(rot.T @ rot, np.eye(3), atol=_ORTHO_TOL, rtol=0.0):
            raise ConfigError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ConfigError(f"rotation determinant {np.linalg.det(rot)} != 1")

    @staticmethod
    def identity() -> "Extrinsics":
        return Extrinsics(np.eye(3), np.zeros(3))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(3)) and not self.translation.any())


@dataclass
class DepthFrame:
    """16-bit depth raster; raw value 0 means no depth; raw * depth_scale = meters."""

    width: int
    height: int
    values: np.ndarray
    depth_scale: float
    frame_id: Optional[int] = None

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.uint16)
        if vals.ndim == 1:
            vals = vals.reshape(self.height, self.width)
        if vals.shape != (self.height, self.width):
            raise FormatError(f"raster shape {vals.shape} != {self.height}x{self.width}")
        if not (self.depth_scale > 0.0):
            raise ConfigError(f"depth_scale must be > 0, got {self.depth_scale}")
        self.values = vals

    def depth_at(self, u: int, v: int) -> float:
        """Depth in meters at an integer pixel; 0.0 when no depth."""
        if not (0 <= u < self.width and 0 <= v < self.height):
            raise OutOfBoundsError(f"pixel ({u}, {v}) outside {self.width}x{self.height}")
        return float(self.values[v, u]) * self.depth_scale


def deproject(pixel: tuple[float, float], depth: float, intr: Intrinsics) -> tuple[float, float, float]:
    """Pixel + depth -> camera-space point (X, Y, Z) in meters."""
    u, v = pixel
    if depth <= 0.0:
        raise InvalidDepthError(f"depth must be > 0, got {depth}")
    if not (0.0 <= u < intr.width and 0.0 <= v < intr.height):
        raise OutOfBoundsError(f"pixel ({u}, {v}) outside {intr.width}x{intr.height}")
    return (
        (u - intr.cx) * depth / intr.fx,
        (v - intr.cy) * depth / intr.fy,
        depth,
    )


def project(point: tuple[float, float, float], intr: Intrinsics) -> tuple[float, float]:
    """Camera-space point -> continuous pixel coordinates (caller rounds)."""
    x, y, z = point
    if z <= 0.0:
        raise BehindCameraError(f"point has Z={z} <= 0")
    return (intr.fx * x / z + intr.cx, intr.fy * y / z + intr.cy)


# Per-calibration ray maps: direction = rotation @ ((u-cx)/fx, (v-cy)/fy, 1),
# precomputed once per (depth intrinsics, rotation) pair.
_MAP_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _ray_maps(intr: Intrinsics, rotation: np.ndarray):
    key = (intr.width, intr.height, intr.fx, intr.fy, intr.cx, intr.cy, rotation.tobytes())
    maps = _MAP_CACHE.get(key)
    if maps is None:
        u = np.arange(intr.width, dtype=np.float64)
        v = np.arange(intr.height, dtype=np.float64)
        gx = np.broadcast_to((u[None, :] - intr.cx) / intr.fx, (intr.height, intr.width)).ravel()
        gy = np.broadcast_to((v[:, None] - intr.cy) / intr.fy, (intr.height, intr.width)).ravel()
        ones = np.ones_like(gx)
        r = rotation
        mx = r[0, 0] * gx + r[0, 1] * gy + r[0, 2] * ones
        my = r[1, 0] * gx + r[1, 1] * gy + r[1, 2] * ones
        mz = r[2, 0] * gx + r[2, 1] * gy + r[2, 2] * ones
        maps = (mx.astype(_F4), my.astype(_F4), mz.astype(_F4))
        if len(_MAP_CACHE) > 32:
            _MAP_CACHE.clear()
        _MAP_CACHE[key] = maps
    return maps


if _HAVE_NUMBA:

    @njit(cache=True, error_model="numpy")
    def _scatter_kernel(vals, mx, my, mz, tx, ty, tz, scale, cfx, cfy, ccx, ccy, cw, ch, out):
        n = vals.size
        inv_scale = _F4(1.0) / scale
        idx = np.empty(n, dtype=np.int32)
        rr = np.empty(n, dtype=np.int32)
        cwm1 = _F4(cw - 1)
        chm1 = _F4(ch - 1)
        zero = _F4(0.0)
        one = _F4(1.0)
        big = _F4(65535.0)
        # Pass 1 is branch-free (bitwise flags + selects) so LLVM can vectorize.
        for i in range(n):
            raw = vals[i]
            z = _F4(raw) * scale
            x = z * mx[i] + tx
            y = z * my[i] + ty
            zc = z * mz[i] + tz
            inv_z = one / zc
            u = np.rint(cfx * x * inv_z + ccx)
            v = np.rint(cfy * y * inv_z + ccy)
            r = np.rint(zc * inv_scale)
            ok = (
                (raw != 0)
                & (zc > zero)
                & (u >= zero)
                & (u <= cwm1)
                & (v >= zero)
                & (v <= chm1)
                & (r >= one)
            )
            us = u if ok else zero
            vs = v if ok else zero
            idx[i] = np.int32(vs) * cw + np.int32(us) if ok else np.int32(-1)
            rr[i] = np.int32(r if r < big else big)
        for i in range(n):
            j = idx[i]
            if j < 0:
                continue
            r16 = np.uint16(rr[i])
            cur = out[j]
            if cur == 0 or r16 < cur:
                out[j] = r16
        return out


def _align_numpy(flat, maps, t, scale, color_intr, cw, ch):
    """Vectorized fallback; mirrors the kernel's float32 op order exactly."""
    mx, my, mz = maps
    scale = _F4(scale)
    z = flat.astype(_F4) * scale
    x = z * mx + _F4(t[0])
    y = z * my + _F4(t[1])
    zc = z * mz + _F4(t[2])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv_z = _F4(1.0) / zc
        uf = np.rint(_F4(color_intr.fx) * x * inv_z + _F4(color_intr.cx))
        vf = np.rint(_F4(color_intr.fy) * y * inv_z + _F4(color_intr.cy))
        rf = np.rint(zc * (_F4(1.0) / scale))
    ok = (flat != 0) & (zc > 0) & (uf >= 0) & (uf <= cw - 1) & (vf >= 0) & (vf <= ch - 1) & (rf >= 1)
    sr = np.minimum(rf[ok], _F4(65535.0)).astype(np.int64)
    si = vf[ok].astype(np.int64) * cw + uf[ok].astype(np.int64)
    # Stable descending sort by depth: on index collisions the last (nearest)
    # write wins, matching the kernel's explicit min.
    order = np.argsort(-sr, kind="stable")
    out = np.zeros(cw * ch, dtype=np.uint16)
    out[si[order]] = sr[order].astype(np.uint16)
    return out


def align_depth_to_color(
    depth: DepthFrame,
    depth_intr: Intrinsics,
    color_intr: Intrinsics,
    depth_to_color: Extrinsics,
    use_numba: Optional[bool] = None,
) -> DepthFrame:
    """Reproject a depth raster into the color camera's pixel grid."""
    if (depth.width, depth.height) != (depth_intr.width, depth_intr.height):
        raise FormatError(
            f"depth raster {depth.width}x{depth.height} does not match intrinsics "
            f"{depth_intr.width}x{depth_intr.height}"
        )
    maps = _ray_maps(depth_intr, depth_to_color.rotation)
    t = depth_to_color.translation
    cw, ch = color_intr.width, color_intr.height
    flat = depth.values.ravel()
    if use_numba is None:
        use_numba = _HAVE_NUMBA
    if use_numba:
        out = np.zeros(cw * ch, dtype=np.uint16)
        _scatter_kernel(
            flat,
            maps[0],
            maps[1],
            maps[2],
            _F4(t[0]),
            _F4(t[1]),
            _F4(t[2]),
            _F4(depth.depth_scale),
            _F4(color_intr.fx),
            _F4(color_intr.fy),
            _F4(color_intr.cx),
            _F4(color_intr.cy),
            np.int32(cw),
            np.int32(ch),
            out,
        )
    else:
        out = _align_numpy(flat, maps, t, depth.depth_scale, color_intr, cw, ch)
    return DepthFrame(
        width=cw,
        height=ch,
        values=out.reshape(ch, cw),
        depth_scale=depth.depth_scale,
        frame_id=depth.frame_id,
    )
