"""Text file formats: correspondence CSV, ASCII point clouds, P6 pixmaps,
key-value run configs and pose files.

Readers accept comma or whitespace separators and reject NaN/Inf; writers
emit commas and 17 significant digits so numeric round trips are exact.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibrator import CalibrationResult, Correspondence, TrainingConfig, TrainingTrace, PARAM_NAMES
from .errors import DataFormatError, InvalidArgument
from .geometry import ExtrinsicPose, PanoPixelRatio, Variant
from .synthdata import NoiseSpec, ScanLayout

CORRESPONDENCE_HEADER = "x_l,y_l,z_l,u,v"
_SPLIT = re.compile(r"[,\s]+")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _rows(path, ncols: set[int]):
    """Yield (line_number, floats) for data rows; skips blanks, comments and a leading header."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read: {exc}") from exc
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _SPLIT.split(line)
        try:
            values = [float(t) for t in tokens]
        except ValueError:
            if not seen_data and any(c.isalpha() for c in line):
                seen_data = True  # header
                continue
            raise DataFormatError(f"{path}:{lineno}: non-numeric token in {raw!r}") from None
        seen_data = True
        if len(values) not in ncols:
            raise DataFormatError(
                f"{path}:{lineno}: expected {' or '.join(map(str, sorted(ncols)))} columns, got {len(values)}"
            )
        bad = [t for t, v in zip(tokens, values) if not math.isfinite(v)]
        if bad:
            raise DataFormatError(f"{path}:{lineno}: non-finite value {bad[0]!r}")
        yield lineno, values


def _write(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"{path}: cannot write: {exc}") from exc


def read_correspondences(path) -> list[Correspondence]:
    out = []
    for lineno, (x, y, z, u, v) in _rows(path, {5}):
        if not 0.0 <= u < 1.0:
            raise DataFormatError(f"{path}:{lineno}: u' = {u!r} outside [0, 1)")
        if not 0.0 < v < 1.0:
            raise DataFormatError(f"{path}:{lineno}: v' = {v!r} outside (0, 1)")
        out.append(Correspondence((x, y, z), PanoPixelRatio(u, v)))
    return out


def write_correspondences(cs, path) -> None:
    lines = [CORRESPONDENCE_HEADER]
    for c in cs:
        lines.append(",".join(_fmt(a) for a in (*c.lidar_point, *c.target)))
    _write(path, "\n".join(lines) + "\n")


@dataclass
class PointCloud:
    xyz: np.ndarray  # (N, 3) float
    rgb: np.ndarray | None = None  # (N, 3) uint8

    def __len__(self) -> int:
        return len(self.xyz)


def read_pointcloud(path) -> PointCloud:
    rows = list(_rows(path, {3, 6}))
    widths = {len(v) for _, v in rows}
    if len(widths) > 1:
        raise DataFormatError(f"{path}: mixed 3- and 6-column rows")
    if not rows:
        return PointCloud(np.empty((0, 3)))
    data = np.array([v for _, v in rows], dtype=float)
    if data.shape[1] == 3:
        return PointCloud(data)
    rgb = data[:, 3:]
    bad = np.nonzero((rgb < 0) | (rgb > 255) | (rgb != np.round(rgb)))[0]
    if len(bad):
        raise DataFormatError(f"{path}:{rows[bad[0]][0]}: colour components must be integers in 0..255")
    return PointCloud(data[:, :3], rgb.astype(np.uint8))


def write_pointcloud(cloud: PointCloud, path) -> None:
    lines = []
    for i, p in enumerate(cloud.xyz):
        cols = [_fmt(a) for a in p]
        if cloud.rgb is not None:
            cols += [str(int(c)) for c in cloud.rgb[i]]
        lines.append(",".join(cols))
    _write(path, "".join(line + "\n" for line in lines))


@dataclass
class ImageRaster:
    pixels: np.ndarray  # (height, width, 3) uint8, row-major

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def filled(cls, width: int, height: int, rgb=(0, 0, 0)) -> "ImageRaster":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:] = rgb
        return cls(px)

    def copy(self) -> "ImageRaster":
        return ImageRaster(self.pixels.copy())


def read_image(path) -> ImageRaster:
    """Binary P6 pixmap with maxval 255."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read: {exc}") from exc
    if data[:2] != b"P6":
        raise DataFormatError(f"{path}: byte 0: bad magic {data[:2]!r}, expected b'P6'")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise DataFormatError(f"{path}: byte {pos}: malformed header")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise DataFormatError(f"{path}: byte {pos}: header must end with one whitespace byte")
    pos += 1
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise DataFormatError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise DataFormatError(f"{path}: maxval {maxval} unsupported, expected 255")
    expected = width * height * 3
    payload = data[pos:]
    if len(payload) != expected:
        raise DataFormatError(f"{path}: byte {pos}: payload is {len(payload)} bytes, expected {expected}")
    if width != 2 * height:
        warnings.warn(f"{path}: {width}x{height} is not a 2:1 equirectangular raster", stacklevel=2)
    return ImageRaster(np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy())


def write_image(image: ImageRaster, path) -> None:
    header = f"P6\n{image.width} {image.height}\n255\n".encode()
    path = Path(path)
    try:
        path.write_bytes(header + np.ascontiguousarray(image.pixels, dtype=np.uint8).tobytes())
    except OSError as exc:
        raise OSError(f"{path}: cannot write: {exc}") from exc


# --- run configuration -----------------------------------------------------

_DEG = math.pi / 180.0
_LAYOUT = ScanLayout()

# key -> (type, default)
CONFIG_KEYS: dict[str, tuple[type, object]] = {
    "max_iterations": (int, TrainingConfig.max_iterations),
    "learning_rate": (float, TrainingConfig.learning_rate),
    "rotation_rate_scale": (float, TrainingConfig.rotation_rate_scale),
    "convergence_epsilon": (float, TrainingConfig.convergence_epsilon),
    "loss_aggregation": (str, TrainingConfig.loss_aggregation),
    "variant": (str, TrainingConfig.variant.value),
    "restarts": (int, TrainingConfig.restarts),
    "rng_seed": (int, TrainingConfig.rng_seed),
    "translation_min": (float, TrainingConfig.translation_box[0]),
    "translation_max": (float, TrainingConfig.translation_box[1]),
    "point_sigma": (float, 0.0),
    "pixel_sigma_u": (float, 0.0),
    "pixel_sigma_v": (float, 0.0),
    "noise_seed": (int, 0),
    "disc_radius": (float, 0.3),
    "channels": (int, _LAYOUT.number_of_channels),
    "elevation_min_deg": (float, -15.0),
    "elevation_max_deg": (float, 15.0),
    "azimuth_step_deg": (float, 0.2),
    "truth_alpha": (float, 4.7112),
    "truth_beta": (float, 0.8932),
    "truth_gamma": (float, 1.8420),
    "truth_b1": (float, 2.8673),
    "truth_b2": (float, 0.6389),
    "truth_b3": (float, -1.7732),
    "width": (int, 4096),
    "height": (int, 2048),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    defaulted: list[str] = field(default_factory=list)

    @classmethod
    def from_mapping(cls, mapping: dict | None = None) -> "RunConfig":
        mapping = dict(mapping or {})
        unknown = sorted(set(mapping) - set(CONFIG_KEYS))
        if unknown:
            raise DataFormatError(f"unknown config key(s): {', '.join(unknown)}")
        values, defaulted = {}, []
        for key, (typ, default) in CONFIG_KEYS.items():
            if key in mapping and mapping[key] is not None:
                values[key] = _coerce(key, typ, mapping[key])
            else:
                values[key] = default
                defaulted.append(key)
        cfg = cls(values, defaulted)
        cfg.training()  # validate eagerly
        cfg.noise()
        return cfg

    def override(self, **changes) -> "RunConfig":
        mapping = {k: v for k, v in self.values.items() if k not in self.defaulted}
        mapping.update({k: v for k, v in changes.items() if v is not None})
        return RunConfig.from_mapping(mapping)

    def __getitem__(self, key):
        return self.values[key]

    def training(self) -> TrainingConfig:
        v = self.values
        try:
            return TrainingConfig(
                max_iterations=v["max_iterations"],
                learning_rate=v["learning_rate"],
                rotation_rate_scale=v["rotation_rate_scale"],
                convergence_epsilon=v["convergence_epsilon"],
                loss_aggregation=v["loss_aggregation"],
                variant=Variant.parse(v["variant"]),
                restarts=v["restarts"],
                rng_seed=v["rng_seed"],
                translation_box=(v["translation_min"], v["translation_max"]),
            )
        except InvalidArgument as exc:
            raise DataFormatError(f"invalid training config: {exc}") from exc

    def noise(self) -> NoiseSpec:
        v = self.values
        try:
            return NoiseSpec(v["point_sigma"], (v["pixel_sigma_u"], v["pixel_sigma_v"]), v["noise_seed"])
        except InvalidArgument as exc:
            raise DataFormatError(f"invalid noise config: {exc}") from exc

    def layout(self) -> ScanLayout:
        v = self.values
        return ScanLayout.uniform(v["channels"], v["elevation_min_deg"] * _DEG, v["elevation_max_deg"] * _DEG,
                                  v["azimuth_step_deg"] * _DEG)

    def truth(self) -> ExtrinsicPose:
        return ExtrinsicPose.from_vector([self.values[f"truth_{n}"] for n in PARAM_NAMES])

    def echo(self) -> str:
        """The effective configuration, one ``key = value`` per line."""
        lines = []
        for key, value in self.values.items():
            note = "  # default" if key in self.defaulted else ""
            lines.append(f"{key} = {value!r}{note}" if isinstance(value, float) else f"{key} = {value}{note}")
        return "\n".join(lines)


def _coerce(key, typ, value):
    try:
        if typ is int:
            if isinstance(value, str):
                out = int(value.strip())
            elif float(value) == int(value):
                out = int(value)
            else:
                raise ValueError(value)
        elif typ is float:
            out = float(value)
            if not math.isfinite(out):
                raise ValueError(value)
        else:
            out = str(value).strip()
    except (TypeError, ValueError):
        raise DataFormatError(f"config key {key!r}: invalid {typ.__name__} value {value!r}") from None
    return out


def _read_key_values(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"{path}: cannot read: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataFormatError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise DataFormatError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_config(path) -> RunConfig:
    mapping = _read_key_values(path)
    unknown = sorted(set(mapping) - set(CONFIG_KEYS))
    if unknown:
        raise DataFormatError(f"{path}: unknown config key(s): {', '.join(unknown)}")
    return RunConfig.from_mapping(mapping)


def write_config(config: RunConfig, path) -> None:
    _write(path, config.echo() + "\n")


# --- pose / result files -----------------------------------------------------

def write_result(result: CalibrationResult, path, extras: dict | None = None) -> None:
    """Pose, final loss and a short trace summary as ``key = value`` lines."""
    lines = [f"{name} = {_fmt(v)}" for name, v in zip(PARAM_NAMES, result.pose.as_vector())]
    lines += [
        f"final_loss = {_fmt(result.final_loss)}",
        f"status = {result.trace.status}",
        f"iterations = {len(result.trace)}",
        f"skipped_points = {result.skipped_points}",
    ]
    if len(result.trace):
        lines.append(f"initial_loss = {_fmt(result.trace.losses[0])}")
    for k, v in (extras or {}).items():
        lines.append(f"{k} = {v}")
    _write(path, "\n".join(lines) + "\n")


def read_pose(path) -> ExtrinsicPose:
    """Read the six pose parameters from a result/pose file; other keys are ignored."""
    kv = _read_key_values(path)
    missing = [n for n in PARAM_NAMES if n not in kv]
    if missing:
        raise DataFormatError(f"{path}: missing pose key(s): {', '.join(missing)}")
    try:
        values = [float(kv[n]) for n in PARAM_NAMES]
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    if not all(math.isfinite(v) for v in values):
        raise DataFormatError(f"{path}: non-finite pose value")
    return ExtrinsicPose.from_vector(values)


def write_pose(pose: ExtrinsicPose, path) -> None:
    _write(path, "".join(f"{n} = {_fmt(v)}\n" for n, v in zip(PARAM_NAMES, pose.as_vector())))


def write_trace(trace: TrainingTrace, path) -> None:
    lines = ["iteration,loss," + ",".join(PARAM_NAMES) + ",grad_inf_norm"]
    for i in range(len(trace)):
        cols = [str(int(trace.iterations[i])), _fmt(trace.losses[i])]
        cols += [_fmt(p) for p in trace.params[i]]
        cols.append(_fmt(trace.grad_norms[i]))
        lines.append(",".join(cols))
    _write(path, "\n".join(lines) + "\n")
