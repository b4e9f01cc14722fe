"""Synthetic correspondences from a circular target scanned by a multi-beam LiDAR.

Each LiDAR channel is modelled locally as a plane through the sensor origin,
tangent to the channel's elevation cone along the azimuth of the target
centre. Where that plane crosses the disc it leaves a straight chord; both
chord endpoints (on the disc rim) become training correspondences.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibrator import Correspondence
from .errors import InvalidArgument
from .geometry import (
    ExtrinsicPose,
    PanoPixelRatio,
    project,
    project_many,
    transform,
)

# Ground-truth extrinsics for the synthetic suite (zxz angles in rad, translation in m).
REFERENCE_POSE = ExtrinsicPose.from_vector([4.7112, 0.8932, 1.8420, 2.8673, 0.6389, -1.7732])

MIN_CHORD_LENGTH = 1e-6


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not n > 0:
        raise InvalidArgument("zero-length direction")
    return v / n


@dataclass(frozen=True)
class TargetRig:
    """A disc target. ``right = up x normal`` completes the in-plane frame.

    ``normal`` is expected to face the sensors; with that orientation the
    in-plane ``right`` axis shows up as increasing ``u`` in the panorama.
    """

    disc_center: tuple[float, float, float]
    disc_normal: tuple[float, float, float]
    disc_radius: float
    up: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        n = np.asarray(self.disc_normal, dtype=float)
        u = np.asarray(self.up, dtype=float)
        if not self.disc_radius > 0:
            raise InvalidArgument("disc_radius must be > 0")
        if abs(np.linalg.norm(n) - 1.0) > 1e-10 or abs(np.linalg.norm(u) - 1.0) > 1e-10:
            raise InvalidArgument("disc_normal and up must be unit vectors")
        if abs(float(n @ u)) > 1e-10:
            raise InvalidArgument("up must be orthogonal to disc_normal")
        for name in ("disc_center", "disc_normal", "up"):
            object.__setattr__(self, name, tuple(float(c) for c in getattr(self, name)))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.disc_center)

    @property
    def normal(self) -> np.ndarray:
        return np.asarray(self.disc_normal)

    @property
    def up_axis(self) -> np.ndarray:
        return np.asarray(self.up)

    @property
    def right_axis(self) -> np.ndarray:
        return np.cross(self.up_axis, self.normal)

    def to_plane(self, right: float, up: float) -> np.ndarray:
        """LiDAR-frame point at in-plane coordinates (right, up)."""
        return self.center + right * self.right_axis + up * self.up_axis

    @classmethod
    def facing_origin(cls, center, radius: float) -> "TargetRig":
        """Vertical disc (horizontal normal) turned towards the LiDAR origin."""
        c = np.asarray(center, dtype=float)
        horizontal = np.array([c[0], c[1], 0.0])
        return cls(tuple(c), tuple(-_unit(horizontal)), radius, (0.0, 0.0, 1.0))

    @classmethod
    def facing_camera(cls, center, radius: float, pose: ExtrinsicPose) -> "TargetRig":
        """Disc at a LiDAR-frame ``center`` turned squarely towards the camera.

        ``up`` is chosen to appear as image-up in the panorama, so the
        in-plane axes line up with the image axes around the target.
        """
        c_l = np.asarray(center, dtype=float)
        c_c = transform(c_l, pose)
        view = _unit(c_c)
        up_c = np.array([0.0, 0.0, 1.0]) - view[2] * view
        r = pose.matrix()
        normal_l = r.T @ -view
        up_l = r.T @ _unit(up_c)
        # re-orthonormalize against rounding in the rotation
        up_l = _unit(up_l - (up_l @ normal_l) * normal_l)
        return cls(tuple(c_l), tuple(_unit(normal_l)), radius, tuple(up_l))


@dataclass(frozen=True)
class ScanLayout:
    elevation_angles: tuple[float, ...] = tuple(math.radians(a) for a in range(-15, 16, 2))
    azimuth_step: float = math.radians(0.2)

    def __post_init__(self):
        e = tuple(float(a) for a in self.elevation_angles)
        if any(b <= a for a, b in zip(e, e[1:])):
            raise InvalidArgument("elevation angles must be strictly increasing")
        if not self.azimuth_step > 0:
            raise InvalidArgument("azimuth_step must be > 0")
        object.__setattr__(self, "elevation_angles", e)

    @property
    def number_of_channels(self) -> int:
        return len(self.elevation_angles)

    @classmethod
    def uniform(cls, channels: int = 16, lowest: float = math.radians(-15), highest: float = math.radians(15),
                azimuth_step: float = math.radians(0.2)) -> "ScanLayout":
        return cls(tuple(np.linspace(lowest, highest, channels)), azimuth_step)


@dataclass(frozen=True)
class ChordSegment:
    """Where one scan plane crosses the disc.

    ``offset`` is the signed distance of the chord from the disc centre along
    the in-plane unit vector at angle ``orientation`` (measured in the disc's
    (right, up) frame). ``quadrant`` is 1-4 for the chord midpoint in that
    frame, 0 for a chord through the centre.
    """

    endpoints: tuple[tuple[float, float, float], tuple[float, float, float]]
    offset: float
    half_length: float
    orientation: float
    quadrant: int
    channel: int = -1

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    def in_plane_endpoints(self) -> np.ndarray:
        """The two endpoints as (right, up) disc coordinates, shape (2, 2)."""
        w = np.array([math.cos(self.orientation), math.sin(self.orientation)])
        t = np.array([-w[1], w[0]])
        mid = self.offset * w
        return np.array([mid - self.half_length * t, mid + self.half_length * t])

    def returns(self, azimuth_step: float) -> np.ndarray:
        """LiDAR returns along the chord at the given angular spacing, endpoints included."""
        a, b = (np.asarray(p) for p in self.endpoints)
        span = math.acos(max(-1.0, min(1.0, float(_unit(a) @ _unit(b)))))
        n = max(1, int(math.ceil(span / azimuth_step)))
        s = np.linspace(0.0, 1.0, n + 1)[:, None]
        return a + s * (b - a)


@dataclass(frozen=True)
class NoiseSpec:
    point_sigma: float = 0.0
    pixel_sigma: float | tuple[float, float] = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        su, sv = self.pixel_sigmas
        if self.point_sigma < 0 or su < 0 or sv < 0:
            raise InvalidArgument("noise sigmas must be >= 0")

    @property
    def pixel_sigmas(self) -> tuple[float, float]:
        if isinstance(self.pixel_sigma, (tuple, list)):
            su, sv = self.pixel_sigma
            return float(su), float(sv)
        return float(self.pixel_sigma), float(self.pixel_sigma)

    @classmethod
    def pixels(cls, sigma_px: float, width: int = 4096, height: int = 2048, point_sigma: float = 0.0,
               rng_seed: int = 0) -> "NoiseSpec":
        """Pixel noise given in pixels of a width x height panorama."""
        return cls(point_sigma, (sigma_px / width, sigma_px / height), rng_seed)


def scan_plane_normal(elevation: float, azimuth: float) -> np.ndarray:
    """Normal of the channel plane through the origin at ``elevation``, tangent along ``azimuth``."""
    se, ce = math.sin(elevation), math.cos(elevation)
    return np.array([-se * math.cos(azimuth), -se * math.sin(azimuth), ce])


def chord_from_plane(rig: TargetRig, plane_normal, channel: int = -1) -> ChordSegment | None:
    """Intersect the plane ``{p : p . n = 0}`` with the disc; None on a miss."""
    n = np.asarray(plane_normal, dtype=float)
    w = np.array([rig.right_axis @ n, rig.up_axis @ n])
    wn = float(np.linalg.norm(w))
    if wn < 1e-12:  # scan plane parallel to the disc
        return None
    w /= wn
    offset = -float(rig.center @ n) / wn
    r = rig.disc_radius
    if abs(offset) > r:
        return None
    half = math.sqrt(max(r * r - offset * offset, 0.0))
    if 2.0 * half <= MIN_CHORD_LENGTH:
        return None
    orientation = math.atan2(w[1], w[0])
    mid = offset * w
    if abs(offset) < 1e-12:
        quadrant = 0
    else:
        quadrant = {(True, True): 1, (False, True): 2, (False, False): 3, (True, False): 4}[
            (mid[0] >= 0, mid[1] >= 0)
        ]
    seg = ChordSegment((), offset, half, orientation, quadrant, channel)
    ends = tuple(tuple(float(c) for c in rig.to_plane(*e)) for e in seg.in_plane_endpoints())
    return ChordSegment(ends, offset, half, orientation, quadrant, channel)


def scan_target(rig: TargetRig, layout: ScanLayout) -> list[ChordSegment]:
    """Chords left on the disc by every channel of ``layout``."""
    c = rig.center
    if np.linalg.norm(c) <= rig.disc_radius:
        raise InvalidArgument("the disc must not contain the sensor origin")
    azimuth = math.atan2(c[1], c[0])
    segments = []
    for k, elev in enumerate(layout.elevation_angles):
        seg = chord_from_plane(rig, scan_plane_normal(elev, azimuth), channel=k)
        if seg is not None:
            segments.append(seg)
    return segments


def generate_correspondences(rigs: TargetRig | Sequence[TargetRig], layout: ScanLayout,
                             truth: ExtrinsicPose, noise: NoiseSpec = NoiseSpec()) -> list[Correspondence]:
    """One correspondence per chord endpoint, targets from the exact projection."""
    if isinstance(rigs, TargetRig):
        rigs = [rigs]
    endpoints = [p for rig in rigs for seg in scan_target(rig, layout) for p in seg.endpoints]
    pts = np.array(endpoints, dtype=float).reshape(-1, 3)
    uv, valid = project_many(transform(pts, truth)) if len(pts) else (np.empty((0, 2)), np.empty(0, bool))
    skipped = int(np.count_nonzero(~valid))
    if skipped:
        warnings.warn(f"skipped {skipped} endpoint(s) at the pole singularity", stacklevel=2)
    pts, uv = pts[valid], uv[valid]

    rng = np.random.default_rng(noise.rng_seed)
    point_noise = rng.normal(size=pts.shape)
    pixel_noise = rng.normal(size=uv.shape)
    pts = pts + noise.point_sigma * point_noise
    uv = uv + pixel_noise * np.array(noise.pixel_sigmas)
    uv[:, 0] %= 1.0
    uv[:, 1] = np.clip(uv[:, 1], 1e-12, 1.0 - 1e-12)
    return [Correspondence(tuple(p), PanoPixelRatio(float(u), float(v))) for p, (u, v) in zip(pts, uv)]


# azimuth (deg), channel elevation (deg), range (m)
_STANDARD_PLACEMENTS = (
    (-85.0, -5.0, 5.0),
    (-60.0, 3.0, 7.5),
    (-35.0, -9.0, 5.5),
    (-10.0, 7.0, 8.0),
    (10.0, -1.0, 6.0),
    (35.0, 11.0, 7.0),
    (60.0, -7.0, 5.0),
    (85.0, 1.0, 6.5),
)


def standard_rigs(radius: float = 0.3) -> list[TargetRig]:
    """Eight vertical disc placements, each crossed by exactly three VLP-16 style channels."""
    rigs = []
    for az, el, rng_m in _STANDARD_PLACEMENTS:
        a, e = math.radians(az), math.radians(el)
        c = rng_m * np.array([math.cos(e) * math.cos(a), math.cos(e) * math.sin(a), math.sin(e)])
        rigs.append(TargetRig.facing_origin(c, radius))
    return rigs


def standard_dataset(noise: NoiseSpec = NoiseSpec(), truth: ExtrinsicPose = REFERENCE_POSE,
                     layout: ScanLayout | None = None) -> list[Correspondence]:
    """48 correspondences: 8 placements x 3 chords x 2 endpoints."""
    return generate_correspondences(standard_rigs(), layout or ScanLayout(), truth, noise)


@dataclass(frozen=True)
class DetectedCircle:
    center: PanoPixelRatio
    radius: tuple[float, float]  # (horizontal, vertical) in pixel ratios


def simulate_circle_detection(rig: TargetRig, pose: ExtrinsicPose) -> DetectedCircle:
    """What an ideal circle detector would report for ``rig`` in the panorama.

    Centre is the projected disc centre; radii are half the projected
    left-right and top-bottom rim spans.
    """
    r = rig.disc_radius
    probe = np.array([
        rig.center,
        rig.to_plane(r, 0.0), rig.to_plane(-r, 0.0),
        rig.to_plane(0.0, r), rig.to_plane(0.0, -r),
    ])
    uv, _ = project_many(transform(probe, pose))
    du = math.remainder(uv[1, 0] - uv[2, 0], 1.0)
    dv = uv[4, 1] - uv[3, 1]
    return DetectedCircle(PanoPixelRatio(float(uv[0, 0]), float(uv[0, 1])), (du / 2.0, dv / 2.0))


def chord_pixel_endpoints(seg: ChordSegment, circle_center_px, circle_radius_px, rig: TargetRig):
    """Pixel ratios of a chord's endpoints from circle geometry alone.

    Scales the chord's in-plane (right, up) coordinates by
    ``circle_radius_px / disc_radius`` about the detected circle centre:
    right maps to +u, up maps to -v. Exact only in the small-angle limit.
    """
    cu, cv = circle_center_px
    ru, rv = circle_radius_px
    if not (ru > 0 and rv > 0):
        raise InvalidArgument("pixel radii must be > 0")
    out = []
    for right, up in seg.in_plane_endpoints():
        u = (cu + ru * right / rig.disc_radius) % 1.0
        v = cv - rv * up / rig.disc_radius
        out.append(PanoPixelRatio(float(u), float(v)))
    return out[0], out[1]


def exact_pixel_endpoints(seg: ChordSegment, pose: ExtrinsicPose):
    """Oracle for :func:`chord_pixel_endpoints`: full projection of the endpoints."""
    return tuple(project(transform(p, pose)) for p in seg.endpoints)
