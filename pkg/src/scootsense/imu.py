"""Accelerometer processing: gravity tracking, vertical-vibration signal, smoothing.

The chain turns a raw three-axis accelerometer stream into a smoothed
linear-vertical-acceleration signal:

    1. an exponential low-pass filter tracks the slowly varying gravity
       components on the Y and Z axes,
    2. the estimated gravity is subtracted and the Y-Z norm taken, giving the
       raw vertical-vibration value,
    3. a scalar Kalman filter (random-walk state model) smooths that value.

Window-level peak/RMS summaries support comparing vibration severity between
recordings. The X axis is parsed and carried but does not enter the vertical
metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from .errors import EmptyWindowError, GravityNotReadyError, InvalidSampleError

# Low-pass coefficient: time constant ~0.25 s at a 200 Hz stream.
DEFAULT_ALPHA = 0.98
# Scalar Kalman defaults: slow random walk, unit measurement variance.
DEFAULT_PROCESS_VAR = 0.05
DEFAULT_MEASUREMENT_VAR = 1.0


@dataclass(frozen=True)
class AccelSample:
    """One accelerometer reading: timestamp in seconds, components in m/s^2."""

    t: float
    ax: float
    ay: float
    az: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.t, self.ax, self.ay, self.az))


@dataclass(frozen=True)
class GravityEstimate:
    """Low-pass-filtered gravity components on the Y and Z axes."""

    gy: float = 0.0
    gz: float = 0.0
    initialized: bool = False


@dataclass(frozen=True)
class KalmanState:
    """Scalar Kalman filter state: estimate x, variance P, noise variances q and r."""

    x: float = 0.0
    P: float = 1.0
    q: float = DEFAULT_PROCESS_VAR
    r: float = DEFAULT_MEASUREMENT_VAR

    def __post_init__(self):
        if not (self.P > 0.0):
            raise ValueError(f"P must be > 0, got {self.P}")
        if self.q < 0.0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        if not (self.r > 0.0):
            raise ValueError(f"r must be > 0, got {self.r}")


@dataclass(frozen=True)
class VibrationPoint:
    """Vertical-vibration value at time t, before and after smoothing."""

    t: float
    raw: float
    smoothed: float


def lowpass_update(state: GravityEstimate, sample: AccelSample, alpha: float = DEFAULT_ALPHA) -> GravityEstimate:
    """Advance the gravity estimate by one sample.

    The first sample seeds the estimate directly (no warm-up transient);
    afterwards g' = alpha*g + (1-alpha)*a per axis.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    if not sample.is_finite():
        raise InvalidSampleError(f"non-finite accelerometer sample at t={sample.t}")
    if not state.initialized:
        return GravityEstimate(gy=sample.ay, gz=sample.az, initialized=True)
    return GravityEstimate(
        gy=alpha * state.gy + (1.0 - alpha) * sample.ay,
        gz=alpha * state.gz + (1.0 - alpha) * sample.az,
        initialized=True,
    )


def linear_vertical_accel(sample: AccelSample, gravity: GravityEstimate) -> float:
    """Gravity-compensated Y-Z norm: sqrt((ay-gy)^2 + (az-gz)^2)."""
    if not gravity.initialized:
        raise GravityNotReadyError("gravity estimate has not seen a sample yet")
    return math.hypot(sample.ay - gravity.gy, sample.az - gravity.gz)


def kalman_step(state: KalmanState, z: float) -> tuple[KalmanState, float]:
    """One predict/update cycle of the scalar random-walk Kalman filter.

    Returns the updated state and the new estimate.
    """
    if not math.isfinite(z):
        raise InvalidSampleError(f"non-finite measurement {z!r}")
    p_pred = state.P + state.q
    gain = p_pred / (p_pred + state.r)
    x = state.x + gain * (z - state.x)
    p = (1.0 - gain) * p_pred
    return replace(state, x=x, P=p), x


def vibration_metrics(window: list[VibrationPoint]) -> dict[str, float]:
    """Peak and RMS of the smoothed signal over a window."""
    if not window:
        raise EmptyWindowError("vibration window is empty")
    peak = max(p.smoothed for p in window)
    rms = math.sqrt(sum(p.smoothed**2 for p in window) / len(window))
    return {"peak": peak, "rms": rms}


class VibrationProcessor:
    """Streams AccelSamples through the full gravity/norm/Kalman chain.

    Single-writer: samples must arrive in timestamp order.
    """

    def __init__(
        self,
        alpha: float = DEFAULT_ALPHA,
        q: float = DEFAULT_PROCESS_VAR,
        r: float = DEFAULT_MEASUREMENT_VAR,
    ):
        self.alpha = alpha
        self.gravity = GravityEstimate()
        self.kalman = KalmanState(q=q, r=r)

    def process(self, sample: AccelSample) -> VibrationPoint:
        self.gravity = lowpass_update(self.gravity, sample, self.alpha)
        raw = linear_vertical_accel(sample, self.gravity)
        self.kalman, smoothed = kalman_step(self.kalman, raw)
        return VibrationPoint(t=sample.t, raw=raw, smoothed=smoothed)

    def process_stream(self, samples: Iterable[AccelSample]) -> Iterator[VibrationPoint]:
        for sample in samples:
            yield self.process(sample)


def windowed_metrics(points: list[VibrationPoint], window_s: float) -> list[dict[str, float]]:
    """Split a vibration series into fixed-duration windows and summarize each.

    Window boundaries are anchored at the first timestamp; the trailing
    partial window is kept. Returns one row per non-empty window with
    t_start, t_end, peak, rms.
    """
    if window_s <= 0.0:
        raise ValueError(f"window_s must be > 0, got {window_s}")
    if not points:
        return []
    t0 = points[0].t
    rows = []
    bucket: list[VibrationPoint] = []
    edge = t0 + window_s
    for p in points:
        while p.t >= edge:
            if bucket:
                m = vibration_metrics(bucket)
                rows.append({"t_start": edge - window_s, "t_end": edge, **m})
                bucket = []
            edge += window_s
        bucket.append(p)
    if bucket:
        m = vibration_metrics(bucket)
        rows.append({"t_start": edge - window_s, "t_end": edge, **m})
    return rows
