"""Loss, analytic gradient and gradient-descent training of the extrinsics.

The regression graph is

    (alpha, beta, gamma, b1, b2, b3) -> X_c = R X_l + T -> (h1, h2) -> (u, v) -> loss

with the fixed imaging model in the middle. Gradients are propagated back
through each node by hand; no autodiff.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import AllPointsRejected, BranchDomain, InvalidArgument
from .geometry import (
    EPS_BRANCH,
    EPS_POLE,
    TWO_PI,
    ExtrinsicPose,
    PanoPixelRatio,
    Variant,
    rotation_matrix_jacobian,
)

log = logging.getLogger(__name__)

PARAM_NAMES = ("alpha", "beta", "gamma", "b1", "b2", "b3")

STATUS_CONVERGED = "converged"
STATUS_LIMIT = "iteration-limit"
STATUS_DIVERGED = "diverged"

CONVERGENCE_WINDOW = 10
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class Correspondence:
    """A LiDAR point and the pixel ratio where it was observed."""

    lidar_point: tuple[float, float, float]
    target: PanoPixelRatio

    def __post_init__(self):
        p = tuple(float(c) for c in self.lidar_point)
        if len(p) != 3 or not all(math.isfinite(c) for c in p):
            raise InvalidArgument(f"invalid LiDAR point {self.lidar_point}")
        u, v = (float(c) for c in self.target)
        if not (0.0 <= u < 1.0 and 0.0 < v < 1.0):
            raise InvalidArgument(f"target {(u, v)} outside [0,1) x (0,1)")
        object.__setattr__(self, "lidar_point", p)
        object.__setattr__(self, "target", PanoPixelRatio(u, v))


@dataclass
class TrainingConfig:
    """Settings for fixed-step full-batch gradient descent.

    The default step sizes are tuned for metre-scale scenes with targets a
    few metres to ~10 m away (the bundled synthetic rig). Translation
    gradients scale like 1/distance^2 relative to the angle gradients, hence
    the small ``rotation_rate_scale``.
    """

    max_iterations: int = 20000
    learning_rate: float = 300.0
    rotation_rate_scale: float = 0.05
    convergence_epsilon: float = 1e-20
    loss_aggregation: str = "mean"
    variant: Variant = Variant.SIGNED
    restarts: int = 16
    rng_seed: int = 0
    translation_box: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        self.validate()

    def validate(self) -> None:
        if self.max_iterations < 0:
            raise InvalidArgument("max_iterations must be >= 0")
        if not self.learning_rate > 0:
            raise InvalidArgument("learning_rate must be > 0")
        if not self.rotation_rate_scale > 0:
            raise InvalidArgument("rotation_rate_scale must be > 0")
        if self.convergence_epsilon < 0:
            raise InvalidArgument("convergence_epsilon must be >= 0")
        if self.loss_aggregation not in ("mean", "sum"):
            raise InvalidArgument(f"loss_aggregation must be 'mean' or 'sum', got {self.loss_aggregation!r}")
        if self.restarts < 1:
            raise InvalidArgument("restarts must be >= 1")
        lo, hi = self.translation_box
        if not lo < hi:
            raise InvalidArgument("translation_box must satisfy low < high")


@dataclass
class TrainingTrace:
    iterations: np.ndarray
    losses: np.ndarray
    params: np.ndarray  # (K, 6)
    grad_norms: np.ndarray  # infinity norm
    status: str

    def __len__(self) -> int:
        return len(self.iterations)


@dataclass
class CalibrationResult:
    pose: ExtrinsicPose
    final_loss: float
    trace: TrainingTrace
    skipped_points: int
    restart_losses: list[float] = field(default_factory=list)


def as_arrays(cs) -> tuple[np.ndarray, np.ndarray]:
    """(N, 3) LiDAR points and (N, 2) targets from correspondences.

    Accepts a sequence of :class:`Correspondence` or an already split
    ``(points, targets)`` pair.
    """
    if isinstance(cs, tuple) and len(cs) == 2 and isinstance(cs[0], np.ndarray):
        return np.asarray(cs[0], dtype=float), np.asarray(cs[1], dtype=float)
    cs = list(cs)
    points = np.array([c.lidar_point for c in cs], dtype=float).reshape(-1, 3)
    targets = np.array([tuple(c.target) for c in cs], dtype=float).reshape(-1, 2)
    return points, targets


def branch_mask(camera_points: np.ndarray) -> np.ndarray:
    x, y = camera_points[:, 0], camera_points[:, 1]
    return (x > EPS_BRANCH) & (x * x + y * y > EPS_POLE)


def _evaluate(points, targets, params, variant, aggregation, with_grad=True):
    """Loss (and gradient) at ``params``; returns (loss, grad, accepted_mask)."""
    r, dr = rotation_matrix_jacobian(params[0], params[1], params[2])
    pc = points @ r.T + params[3:]
    ok = branch_mask(pc)
    n = int(np.count_nonzero(ok))
    if n == 0:
        return math.nan, None, ok
    if n < len(ok):
        pc_ok, pl, tg = pc[ok], points[ok], targets[ok]
    else:
        pc_ok, pl, tg = pc, points, targets
    x, y, z = pc_ok[:, 0], pc_ok[:, 1], pc_ok[:, 2]
    rho2 = x * x + y * y
    rho = np.sqrt(rho2)

    h1 = y / x
    du = (math.pi - np.arctan(h1)) / TWO_PI - tg[:, 0]
    if variant is Variant.PAPER:
        h2 = z * z / rho2
        sq = np.sqrt(h2)
        dv = (0.5 * math.pi - np.arctan(sq)) / math.pi - tg[:, 1]
    else:
        h2 = z / rho
        dv = (0.5 * math.pi - np.arctan(h2)) / math.pi - tg[:, 1]

    weight = 1.0 / n if aggregation == "mean" else 1.0
    loss = 0.5 * weight * float(np.sum(du * du + dv * dv))
    if not with_grad:
        return loss, None, ok

    # output layer: d loss / d(u, v)
    gu = weight * du
    gv = weight * dv
    # imaging layer: d(u, v) / d(h1, h2)
    g_h1 = gu * (-1.0 / (TWO_PI * (1.0 + h1 * h1)))
    if variant is Variant.PAPER:
        with np.errstate(divide="ignore", invalid="ignore"):
            dv_dh2 = -1.0 / (math.pi * (1.0 + h2) * 2.0 * sq)
        # |z| has a kink at z = 0; take the symmetric subgradient there
        dv_dh2 = np.where(sq > 0.0, dv_dh2, 0.0)
        g_h2 = gv * dv_dh2
        rho4 = rho2 * rho2
        gx = g_h1 * (-y / (x * x)) + g_h2 * (-2.0 * z * z * x / rho4)
        gy = g_h1 / x + g_h2 * (-2.0 * z * z * y / rho4)
        gz = g_h2 * (2.0 * z / rho2)
    else:
        g_h2 = gv * (-1.0 / (math.pi * (1.0 + h2 * h2)))
        rho3 = rho2 * rho
        gx = g_h1 * (-y / (x * x)) + g_h2 * (-z * x / rho3)
        gy = g_h1 / x + g_h2 * (-z * y / rho3)
        gz = g_h2 / rho
    g_pc = np.column_stack([gx, gy, gz])
    # rigid layer: X_c = R X_l + T
    grad = np.empty(6)
    for k in range(3):
        grad[k] = float(np.sum(g_pc * (pl @ dr[k].T)))
    grad[3:] = g_pc.sum(axis=0)
    return loss, grad, ok


def _config_or_default(config: TrainingConfig | None) -> TrainingConfig:
    return config if config is not None else TrainingConfig()


def point_loss(c: Correspondence, pose: ExtrinsicPose, variant: Variant | str = Variant.SIGNED) -> float:
    points, targets = as_arrays([c])
    loss, _, ok = _evaluate(points, targets, pose.as_vector(), Variant.parse(variant), "sum", with_grad=False)
    if not ok[0]:
        raise BranchDomain(f"correspondence {c} maps outside the x > 0 branch under {pose}")
    return loss


def batch_loss(cs, pose: ExtrinsicPose, config: TrainingConfig | None = None) -> tuple[float, int]:
    """Aggregated loss over the correspondences that pass the branch guards."""
    config = _config_or_default(config)
    points, targets = as_arrays(cs)
    loss, _, ok = _evaluate(points, targets, pose.as_vector(), config.variant, config.loss_aggregation, with_grad=False)
    n = int(np.count_nonzero(ok))
    if n == 0:
        raise AllPointsRejected(f"all {len(ok)} correspondences fail the branch guards")
    return loss, n


def loss_gradient(cs, pose: ExtrinsicPose, config: TrainingConfig | None = None) -> np.ndarray:
    """Gradient of :func:`batch_loss` with respect to (alpha, beta, gamma, b1, b2, b3)."""
    config = _config_or_default(config)
    points, targets = as_arrays(cs)
    _, grad, ok = _evaluate(points, targets, pose.as_vector(), config.variant, config.loss_aggregation)
    if grad is None:
        raise AllPointsRejected(f"all {len(ok)} correspondences fail the branch guards")
    return grad


def train(cs, init: ExtrinsicPose, config: TrainingConfig | None = None) -> CalibrationResult:
    """Fixed-step gradient descent from ``init``.

    Stops on the iteration limit, when the loss changes by less than
    ``convergence_epsilon`` over a 10-iteration window, or on divergence
    (non-finite loss or growth beyond 1e6 x the initial loss). The
    best-loss parameters seen are returned.
    """
    config = _config_or_default(config)
    config.validate()
    points, targets = as_arrays(cs)
    if len(points) == 0:
        raise InvalidArgument("no correspondences to train on")

    n_max = config.max_iterations + 1
    losses = np.empty(n_max)
    params_hist = np.empty((n_max, 6))
    grad_norms = np.empty(n_max)
    step_scale = np.array([config.rotation_rate_scale] * 3 + [1.0] * 3) * config.learning_rate

    params = init.as_vector()
    best_loss, best_params, best_skipped = math.inf, params.copy(), 0
    status = STATUS_LIMIT
    count = 0
    initial_loss = None
    for it in range(n_max):
        loss, grad, ok = _evaluate(points, targets, params, config.variant, config.loss_aggregation)
        if grad is None:
            raise AllPointsRejected(
                f"all {len(ok)} correspondences fail the branch guards at iteration {it}", iteration=it
            )
        if initial_loss is None:
            initial_loss = loss
        if not math.isfinite(loss) or not np.all(np.isfinite(grad)) or loss > DIVERGENCE_FACTOR * max(initial_loss, 1e-300):
            status = STATUS_DIVERGED
            log.debug("diverged at iteration %d (loss=%r)", it, loss)
            break
        losses[it] = loss
        params_hist[it] = params
        grad_norms[it] = float(np.max(np.abs(grad)))
        count = it + 1
        if loss < best_loss:
            best_loss, best_params, best_skipped = loss, params.copy(), len(ok) - int(np.count_nonzero(ok))
        if it >= CONVERGENCE_WINDOW and abs(losses[it - CONVERGENCE_WINDOW] - loss) < config.convergence_epsilon:
            status = STATUS_CONVERGED
            break
        if it == n_max - 1:
            break
        params = params - step_scale * grad

    trace = TrainingTrace(
        iterations=np.arange(count),
        losses=losses[:count].copy(),
        params=params_hist[:count].copy(),
        grad_norms=grad_norms[:count].copy(),
        status=status,
    )
    pose = ExtrinsicPose.from_vector(best_params).normalized()
    return CalibrationResult(pose=pose, final_loss=best_loss, trace=trace, skipped_points=best_skipped)


def sample_initial_poses(config: TrainingConfig) -> list[ExtrinsicPose]:
    """The ``restarts`` seeded initial poses used by :func:`train_multistart`."""
    rng = np.random.default_rng(config.rng_seed)
    lo, hi = config.translation_box
    poses = []
    for _ in range(config.restarts):
        angles = rng.uniform([0.0, 0.0, 0.0], [TWO_PI, math.pi, TWO_PI])
        trans = rng.uniform(lo, hi, size=3)
        poses.append(ExtrinsicPose.from_vector(np.concatenate([angles, trans])))
    return poses


def train_multistart(cs, config: TrainingConfig | None = None) -> CalibrationResult:
    """Train from ``config.restarts`` random initial poses and keep the best.

    Results are ranked by the number of skipped correspondences first and
    final loss second, so a restart that fits a small subset of the data
    after pushing the rest behind the camera never wins.
    """
    config = _config_or_default(config)
    config.validate()
    cs = as_arrays(cs)
    best = None
    errors = []
    restart_losses = []
    for i, init in enumerate(sample_initial_poses(config)):
        try:
            result = train(cs, init, config)
        except AllPointsRejected as exc:
            log.debug("restart %d rejected: %s", i, exc)
            errors.append(exc)
            restart_losses.append(math.nan)
            continue
        restart_losses.append(result.final_loss)
        log.debug("restart %d: loss=%.3e skipped=%d status=%s", i, result.final_loss, result.skipped_points, result.trace.status)
        if best is None or (result.skipped_points, result.final_loss) < (best.skipped_points, best.final_loss):
            best = result
    if best is None:
        raise errors[-1]
    return replace(best, restart_losses=restart_losses)


def reference_loss(cs, params: Iterable[float], aggregation: str = "mean", dtype=np.longdouble) -> float:
    """Loss evaluated through the full atan2 projection model.

    Written independently of the h-form path and of :mod:`geometry`, and
    evaluated in extended precision by default so that central differences
    of it are not dominated by rounding. Only meaningful where every point
    has x_c > 0.
    """
    points, targets = as_arrays(cs)
    a, b, g, t1, t2, t3 = (dtype(p) for p in params)
    ca, sa, cb, sb, cg, sg = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(g), np.sin(g)
    rot = np.array([
        [ca * cg - sa * cb * sg, -ca * sg - sa * cb * cg, sa * sb],
        [sa * cg + ca * cb * sg, -sa * sg + ca * cb * cg, -ca * sb],
        [sb * sg, sb * cg, cb],
    ], dtype=dtype)
    pc = points.astype(dtype) @ rot.T + np.array([t1, t2, t3], dtype=dtype)
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    pi = np.arctan2(dtype(0), dtype(-1))
    u = (pi - np.arctan2(y, x)) / (2 * pi)
    v = (pi - 2 * np.arctan(z / np.sqrt(x * x + y * y))) / (2 * pi)
    res_u = u - targets[:, 0].astype(dtype)
    res_v = v - targets[:, 1].astype(dtype)
    total = np.sum(res_u * res_u + res_v * res_v) / 2
    return total / len(points) if aggregation == "mean" else total


def finite_difference_gradient(f, params: Sequence[float], step: float = 1e-6, dtype=np.longdouble) -> np.ndarray:
    """Central differences of a scalar function of the six pose parameters."""
    x0 = np.asarray(params, dtype=dtype)
    h = dtype(step)
    grad = np.empty(len(x0))
    for j in range(len(x0)):
        xp, xm = x0.copy(), x0.copy()
        xp[j] += h
        xm[j] -= h
        grad[j] = float((f(xp) - f(xm)) / (2 * h))
    return grad


def gradient_check(samples: int = 1000, seed: int = 0, step: float = 1e-6, variant: Variant | str = Variant.SIGNED):
    """Compare analytic and central-difference gradients on random samples.

    Each sample is a random pose and one random correspondence whose
    transformed point lies safely inside x_c > 0 (and z_c > 0 for the
    paper-exact variant). The finite differences run on the atan2 model in
    extended precision, not on the h-form, so the oracle shares no code with
    the analytic path. Returns the array of per-sample max relative errors,
    with a 1e-8 floor on the denominator.
    """
    from .geometry import inverse_transform

    variant = Variant.parse(variant)
    rng = np.random.default_rng(seed)
    config = TrainingConfig(loss_aggregation="mean", variant=variant)
    errs = np.empty(samples)
    for i in range(samples):
        params = np.concatenate([
            rng.uniform([0.0, 0.0, 0.0], [TWO_PI, math.pi, TWO_PI]),
            rng.uniform(-5.0, 5.0, size=3),
        ])
        pose = ExtrinsicPose.from_vector(params)
        # camera-frame direction well inside the valid half-space
        az = rng.uniform(-1.2, 1.2)
        el = rng.uniform(0.05, 1.2) if variant is Variant.PAPER else rng.uniform(-1.2, 1.2)
        dist = rng.uniform(1.0, 20.0)
        pc = dist * np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
        pl = inverse_transform(pc, pose)
        target = PanoPixelRatio(rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.9))
        cs = [Correspondence(tuple(pl), target)]
        analytic = loss_gradient(cs, pose, config)
        numeric = finite_difference_gradient(lambda p: reference_loss(cs, p), params, step)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
        errs[i] = float(np.max(np.abs(analytic - numeric) / denom))
    return errs
