"""Ground-obstacle proximity pipeline for e-scooters.

Fuses per-frame object detections with aligned depth imagery to estimate
obstacle distances, raises warnings at close range, processes IMU streams
into a smoothed vertical-vibration signal, and evaluates detection quality
with per-category mAP reports.
"""

from .alerts import AlertConfig, AlertState, WarningEvent, assess
from .detections import (
    BBox,
    CATEGORY_NAMES,
    Detection,
    DetectionSource,
    ProcessDetectionSource,
    ReplayDetectionSource,
    StreamDetectionSource,
    postprocess,
)
from .evaluation import EvalReport, GroundTruthBox, average_precision, evaluate, iou, match_detections
from .fusion import FusedDetection, FusionConfig, fuse, robust_depth, sample_points
from .geometry import DepthFrame, Extrinsics, Intrinsics, align_depth_to_color, deproject, project
from .imu import (
    AccelSample,
    GravityEstimate,
    KalmanState,
    VibrationPoint,
    VibrationProcessor,
    kalman_step,
    linear_vertical_accel,
    lowpass_update,
    vibration_metrics,
)
from .pipeline import ImuParams, PipelineConfig, RunSummary, run_bench, run_imu, run_render, run_replay

__version__ = "0.1.0"

__all__ = [
    "AccelSample",
    "AlertConfig",
    "AlertState",
    "BBox",
    "CATEGORY_NAMES",
    "DepthFrame",
    "Detection",
    "DetectionSource",
    "EvalReport",
    "Extrinsics",
    "FusedDetection",
    "FusionConfig",
    "GravityEstimate",
    "GroundTruthBox",
    "ImuParams",
    "Intrinsics",
    "KalmanState",
    "PipelineConfig",
    "ProcessDetectionSource",
    "ReplayDetectionSource",
    "RunSummary",
    "StreamDetectionSource",
    "VibrationPoint",
    "VibrationProcessor",
    "WarningEvent",
    "align_depth_to_color",
    "assess",
    "average_precision",
    "deproject",
    "evaluate",
    "fuse",
    "iou",
    "kalman_step",
    "linear_vertical_accel",
    "lowpass_update",
    "match_detections",
    "postprocess",
    "project",
    "robust_depth",
    "run_bench",
    "run_imu",
    "run_render",
    "run_replay",
    "sample_points",
    "vibration_metrics",
]
