"""Reprojection error, projection overlays and point-cloud colourization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .calibrator import as_arrays, branch_mask
from .dataset import ImageRaster, PointCloud
from .errors import InvalidArgument
from .geometry import ExtrinsicPose, Variant, project_many, transform

MARKER = (255, 0, 0)


@dataclass
class ReprojectionReport:
    width: int
    height: int
    du: np.ndarray  # signed, wrap-aware, ratio units; NaN where skipped
    dv: np.ndarray
    accepted: int
    skipped: int
    outside_branch: int  # points the h-form regression would ignore

    @property
    def horizontal_px(self) -> np.ndarray:
        return np.abs(self.du[np.isfinite(self.du)]) * self.width

    @property
    def vertical_px(self) -> np.ndarray:
        return np.abs(self.dv[np.isfinite(self.dv)]) * self.height

    def _agg(self, values, fn) -> float:
        return float(fn(values)) if len(values) else math.nan

    @property
    def mean_horizontal_px(self) -> float:
        return self._agg(self.horizontal_px, np.mean)

    @property
    def mean_vertical_px(self) -> float:
        return self._agg(self.vertical_px, np.mean)

    @property
    def max_horizontal_px(self) -> float:
        return self._agg(self.horizontal_px, np.max)

    @property
    def max_vertical_px(self) -> float:
        return self._agg(self.vertical_px, np.max)

    def summary(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "accepted": self.accepted,
            "skipped": self.skipped,
            "outside_branch": self.outside_branch,
            "mean_horizontal_px": self.mean_horizontal_px,
            "mean_vertical_px": self.mean_vertical_px,
            "max_horizontal_px": self.max_horizontal_px,
            "max_vertical_px": self.max_vertical_px,
        }

    def to_text(self) -> str:
        s = self.summary()
        human = (
            f"Reprojection error at {self.width}x{self.height} over {self.accepted} point(s)"
            f" ({self.skipped} skipped)\n"
            f"  horizontal: mean {s['mean_horizontal_px']:.4f} px, max {s['max_horizontal_px']:.4f} px\n"
            f"  vertical:   mean {s['mean_vertical_px']:.4f} px, max {s['max_vertical_px']:.4f} px\n"
        )
        block = "\n".join(f"{k} = {format(v, '.17g') if isinstance(v, float) else v}" for k, v in s.items())
        return human + "[report]\n" + block + "\n"


def reprojection_report(cs, pose: ExtrinsicPose, width: int, height: int,
                        variant: Variant | str = Variant.SIGNED) -> ReprojectionReport:
    """Per-point pixel errors through the full atan2 projection model.

    Horizontal differences wrap around the 0/1 seam. ``variant`` does not
    change the errors; it only decides which points are reported as outside
    the regression branch.
    """
    if width <= 0 or height <= 0:
        raise InvalidArgument("width and height must be > 0")
    Variant.parse(variant)
    points, targets = as_arrays(cs)
    pc = transform(points, pose) if len(points) else np.empty((0, 3))
    uv, valid = project_many(pc) if len(points) else (np.empty((0, 2)), np.empty(0, bool))
    du = np.remainder(uv[:, 0] - targets[:, 0] + 0.5, 1.0) - 0.5
    dv = uv[:, 1] - targets[:, 1]
    outside = int(np.count_nonzero(~branch_mask(pc))) if len(points) else 0
    return ReprojectionReport(width, height, du, dv, int(np.count_nonzero(valid)),
                              int(np.count_nonzero(~valid)), outside)


def pixel_indices(uv: np.ndarray, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Nearest pixel (col, row) for pixel ratios; columns wrap, rows clamp."""
    col = np.floor(uv[:, 0] * width + 0.5).astype(np.int64) % width
    row = np.clip(np.floor(uv[:, 1] * height + 0.5).astype(np.int64), 0, height - 1)
    return col, row


def _project_cloud(cloud: PointCloud, pose: ExtrinsicPose, width: int, height: int):
    if len(cloud) == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, bool)
    uv, valid = project_many(transform(cloud.xyz, pose))
    col = np.zeros(len(cloud), np.int64)
    row = np.zeros(len(cloud), np.int64)
    col[valid], row[valid] = pixel_indices(uv[valid], width, height)
    return col, row, valid


class Overlay(NamedTuple):
    image: ImageRaster
    drawn: int
    skipped: int


def project_overlay(cloud: PointCloud, image: ImageRaster, pose: ExtrinsicPose, color=MARKER) -> Overlay:
    """Draw every projectable cloud point as a one-pixel dot on a copy of ``image``."""
    out = image.copy()
    col, row, valid = _project_cloud(cloud, pose, image.width, image.height)
    out.pixels[row[valid], col[valid]] = color
    drawn = int(np.count_nonzero(valid))
    return Overlay(out, drawn, len(cloud) - drawn)


class Colorized(NamedTuple):
    cloud: PointCloud
    colored: int
    uncolored: int  # dropped, or kept black when keep_uncolored=True


def colorize_cloud(cloud: PointCloud, image: ImageRaster, pose: ExtrinsicPose,
                   keep_uncolored: bool = False) -> Colorized:
    """Nearest-neighbour colour lookup of each point's projected pixel.

    Existing colours on ``cloud`` are ignored, so colourizing twice is a no-op.
    """
    col, row, valid = _project_cloud(cloud, pose, image.width, image.height)
    rgb = np.zeros((len(cloud), 3), np.uint8)
    rgb[valid] = image.pixels[row[valid], col[valid]]
    n_ok = int(np.count_nonzero(valid))
    if keep_uncolored:
        return Colorized(PointCloud(cloud.xyz.copy(), rgb), n_ok, len(cloud) - n_ok)
    return Colorized(PointCloud(cloud.xyz[valid].copy(), rgb[valid]), n_ok, len(cloud) - n_ok)
