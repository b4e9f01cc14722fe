"""Rigid transforms, zxz Euler rotations and the spherical panorama model.

Conventions
-----------
* Rotation: ``R = Rz(alpha) @ Rx(beta) @ Rz(gamma)`` with right-handed
  elementary rotations (intrinsic z-x'-z'').
* Transform: ``X_c = R @ X_l + T``.
* Projection of a camera-frame point ``(x, y, z)`` to pixel ratios::

      u = (pi - atan2(y, x)) / (2 pi)                     in [0, 1)
      v = (pi - 2 arctan(z / sqrt(x^2 + y^2))) / (2 pi)   in (0, 1)

  so the +x axis lands in the image centre, ``u`` grows towards -y and
  ``v`` grows downwards.
* h-form: the arctan-free surrogate used during regression, valid on the
  half-space ``x > 0`` where ``atan2(y, x) == arctan(y / x)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BranchDomain, InvalidArgument, PoleSingularity

EPS_POLE = 1e-12  # m^2, on x^2 + y^2
EPS_BRANCH = 1e-9  # m, on x

TWO_PI = 2.0 * math.pi


class Variant(str, enum.Enum):
    """Which h-form the regression runs on.

    ``PAPER`` squares the elevation term (h2 = z^2 / rho^2) and therefore only
    reproduces ``v`` on the upper hemisphere ``z >= 0``. ``SIGNED`` keeps the
    sign (h2s = z / rho) and is valid for any ``z``.
    """

    SIGNED = "signed"
    PAPER = "paper-exact"

    @classmethod
    def parse(cls, value: "Variant | str") -> "Variant":
        if isinstance(value, cls):
            return value
        for member in cls:
            if value in (member.value, member.name.lower()):
                return member
        if value == "paper":
            return cls.PAPER
        raise InvalidArgument(f"unknown variant {value!r}")


@dataclass(frozen=True)
class EulerZXZ:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not all(math.isfinite(a) for a in (self.alpha, self.beta, self.gamma)):
            raise InvalidArgument(f"non-finite Euler angles {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma], dtype=float)

    def normalized(self) -> "EulerZXZ":
        """Equivalent angles with alpha, gamma in [0, 2pi) and beta in [0, pi].

        Uses the identity Rz(a+pi) Rx(-b) Rz(g+pi) == Rz(a) Rx(b) Rz(g).
        """
        a, b, g = self.alpha, self.beta, self.gamma
        b = math.remainder(b, TWO_PI)  # (-pi, pi]
        if b < 0.0:
            a, b, g = a + math.pi, -b, g + math.pi
        return EulerZXZ(_wrap_2pi(a), b, _wrap_2pi(g))


def _wrap_2pi(angle: float) -> float:
    wrapped = angle % TWO_PI
    # x % 2pi can round up to exactly 2pi for tiny negative x
    return 0.0 if wrapped >= TWO_PI else wrapped


@dataclass(frozen=True)
class ExtrinsicPose:
    """LiDAR-to-camera extrinsics: six parameters (alpha, beta, gamma, b1, b2, b3)."""

    rotation: EulerZXZ
    translation: tuple[float, float, float]

    def __post_init__(self):
        t = tuple(float(c) for c in self.translation)
        if len(t) != 3 or not all(math.isfinite(c) for c in t):
            raise InvalidArgument(f"translation must be 3 finite values, got {self.translation}")
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_vector(cls, params) -> "ExtrinsicPose":
        p = [float(x) for x in params]
        if len(p) != 6:
            raise InvalidArgument(f"expected 6 pose parameters, got {len(p)}")
        return cls(EulerZXZ(*p[:3]), tuple(p[3:]))

    @classmethod
    def identity(cls) -> "ExtrinsicPose":
        return cls(EulerZXZ(0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.rotation.as_array(), np.asarray(self.translation)])

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.rotation)

    def normalized(self) -> "ExtrinsicPose":
        return ExtrinsicPose(self.rotation.normalized(), self.translation)


class PanoPixelRatio(NamedTuple):
    u: float
    v: float


class HForm(NamedTuple):
    h1: float
    h2: float  # z^2/rho^2 for PAPER, z/rho for SIGNED
    variant: Variant


def _rz(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rx(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _drz(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def _drx(t: float) -> np.ndarray:
    c, s = math.cos(t), math.sin(t)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def rotation_matrix(e: EulerZXZ | tuple | np.ndarray) -> np.ndarray:
    """``Rz(alpha) @ Rx(beta) @ Rz(gamma)``."""
    if not isinstance(e, EulerZXZ):
        e = EulerZXZ(*(float(a) for a in e))
    return _rz(e.alpha) @ _rx(e.beta) @ _rz(e.gamma)


def rotation_matrix_jacobian(alpha: float, beta: float, gamma: float):
    """Return ``R`` and its partial derivatives with respect to each angle."""
    za, xb, zg = _rz(alpha), _rx(beta), _rz(gamma)
    xz = xb @ zg
    r = za @ xz
    dr_da = _drz(alpha) @ xz
    dr_db = za @ _drx(beta) @ zg
    dr_dg = za @ xb @ _drz(gamma)
    return r, (dr_da, dr_db, dr_dg)


def _as_points(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1] != 3:
        raise InvalidArgument(f"points must have a trailing dimension of 3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("non-finite point coordinates")
    return arr


def transform(p, pose: ExtrinsicPose) -> np.ndarray:
    """Map LiDAR-frame point(s) of shape (..., 3) into the camera frame."""
    pts = _as_points(p)
    return pts @ pose.matrix().T + np.asarray(pose.translation)


def inverse_transform(p, pose: ExtrinsicPose) -> np.ndarray:
    """Map camera-frame point(s) back into the LiDAR frame."""
    pts = _as_points(p)
    return (pts - np.asarray(pose.translation)) @ pose.matrix()


def project_many(points) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection.

    Returns ``(uv, valid)`` where ``uv`` has shape (N, 2) and ``valid`` marks
    points clear of the pole singularity. Invalid rows hold NaN.
    """
    pts = np.atleast_2d(_as_points(points))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho2 = x * x + y * y
    valid = rho2 > EPS_POLE
    with np.errstate(invalid="ignore", divide="ignore"):
        u = (math.pi - np.arctan2(y + 0.0, x)) / TWO_PI
        u = np.where(u >= 1.0, u - 1.0, u)
        v = (math.pi - 2.0 * np.arctan(z / np.sqrt(rho2))) / TWO_PI
    uv = np.column_stack([u, v])
    uv[~valid] = np.nan
    return uv, valid


def project(p) -> PanoPixelRatio:
    """Project a single camera-frame point to pixel ratios."""
    uv, valid = project_many(np.reshape(_as_points(p), (1, 3)))
    if not valid[0]:
        raise PoleSingularity(f"point {tuple(np.ravel(p))} is on the pole axis")
    return PanoPixelRatio(float(uv[0, 0]), float(uv[0, 1]))


def unproject_many(uv) -> np.ndarray:
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    azimuth = math.pi - TWO_PI * uv[:, 0]
    elevation = 0.5 * math.pi - math.pi * uv[:, 1]
    ce = np.cos(elevation)
    return np.column_stack([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)])


def unproject(px: PanoPixelRatio | tuple) -> np.ndarray:
    """Unit viewing direction in the camera frame for a pixel ratio."""
    u, v = px
    if not (0.0 <= u < 1.0 and 0.0 < v < 1.0):
        raise InvalidArgument(f"pixel ratio {(u, v)} outside [0,1) x (0,1)")
    return unproject_many([[u, v]])[0]


def h_form(p, variant: Variant | str = Variant.SIGNED) -> HForm:
    variant = Variant.parse(variant)
    x, y, z = (float(c) for c in _as_points(p))
    if abs(x) <= EPS_BRANCH:
        raise BranchDomain(f"x = {x} is within {EPS_BRANCH} of the atan2 branch cut")
    rho2 = x * x + y * y
    if rho2 <= EPS_POLE:
        raise PoleSingularity(f"point {(x, y, z)} is on the pole axis")
    h1 = y / x
    if variant is Variant.PAPER:
        return HForm(h1, z * z / rho2, variant)
    return HForm(h1, z / math.sqrt(rho2), variant)


def reconstruct_uv(h: HForm, variant: Variant | str | None = None) -> PanoPixelRatio:
    """Undo the h-form: pixel ratios from (h1, h2)."""
    variant = Variant.parse(variant if variant is not None else h.variant)
    h1, h2 = float(h[0]), float(h[1])
    if not (math.isfinite(h1) and math.isfinite(h2)):
        raise InvalidArgument(f"non-finite h-form {(h1, h2)}")
    u = (math.pi - math.atan(h1)) / TWO_PI
    if variant is Variant.PAPER:
        if h2 < 0.0:
            raise InvalidArgument(f"paper-exact h2 must be >= 0, got {h2}")
        v = (0.5 * math.pi - math.atan(math.sqrt(h2))) / math.pi
    else:
        v = (0.5 * math.pi - math.atan(h2)) / math.pi
    return PanoPixelRatio(u, v)
