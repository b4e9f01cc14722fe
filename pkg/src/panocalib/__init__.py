"""LiDAR / spherical panorama extrinsic calibration by gradient-descent regression."""

from .calibrator import (
    CalibrationResult,
    Correspondence,
    TrainingConfig,
    TrainingTrace,
    batch_loss,
    loss_gradient,
    point_loss,
    train,
    train_multistart,
)
from .geometry import (
    EulerZXZ,
    ExtrinsicPose,
    HForm,
    PanoPixelRatio,
    Variant,
    h_form,
    project,
    reconstruct_uv,
    rotation_matrix,
    transform,
    unproject,
)
from .synthdata import REFERENCE_POSE

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult", "Correspondence", "TrainingConfig", "TrainingTrace",
    "batch_loss", "loss_gradient", "point_loss", "train", "train_multistart",
    "EulerZXZ", "ExtrinsicPose", "HForm", "PanoPixelRatio", "Variant",
    "h_form", "project", "reconstruct_uv", "rotation_matrix", "transform", "unproject",
    "REFERENCE_POSE",
]
