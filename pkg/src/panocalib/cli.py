"""Command-line entry point.

    panocalib synth      --out d.csv [--seed N] [--cloud returns.xyz]
    panocalib calibrate  --in d.csv --out pose.txt [--trace trace.csv] [--init pose.txt]
    panocalib gradcheck  [--samples 1000] [--seed 1]
    panocalib project    --cloud c.xyz --image pano.ppm [--pose pose.txt] --out overlay.ppm
    panocalib colorize   --cloud c.xyz --image pano.ppm [--pose pose.txt] --out colored.xyz
    panocalib evaluate   --in d.csv [--pose pose.txt] [--width W --height H] [--out report.txt]

All subcommands take ``--config FILE`` and ``--set KEY=VALUE`` overrides and
echo their effective configuration to stdout. Exit codes: 0 ok, 2 usage,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import calibrator, dataset, evaluate, synthdata
from .errors import (
    AllPointsRejected,
    BranchDomain,
    DataFormatError,
    InvalidArgument,
    NumericalFailure,
    PoleSingularity,
)
from .geometry import Variant

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("panocalib")


class UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key = value run configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a run configuration key (repeatable)")
    p.add_argument("--seed", type=int, help="random seed for this subcommand")
    p.add_argument("--variant", choices=[v.value for v in Variant], help="h-form variant")
    p.add_argument("--width", type=int, help="panorama width in pixels")
    p.add_argument("--height", type=int, help="panorama height in pixels")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panocalib", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic correspondences")
    _add_common(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--meta", type=Path, help="sidecar metadata path (default: OUT.meta)")
    p.add_argument("--cloud", type=Path, help="also write every simulated LiDAR return along the chords")

    p = sub.add_parser("calibrate", help="recover the extrinsics from correspondences")
    _add_common(p)
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--trace", type=Path, help="write the per-iteration trace as CSV")
    p.add_argument("--init", type=Path, help="start from this pose instead of multistart")

    p = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    _add_common(p)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tolerance", type=float, default=1e-5)
    p.add_argument("--step", type=float, default=1e-6)

    for name, helptext in (("project", "overlay a point cloud on a panorama"),
                           ("colorize", "colour a point cloud from a panorama")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        p.add_argument("--cloud", type=Path, required=True)
        p.add_argument("--image", type=Path, required=True)
        p.add_argument("--pose", type=Path, help="pose file (default: the configured truth pose)")
        p.add_argument("--out", type=Path, required=True)
        if name == "colorize":
            p.add_argument("--keep-uncolored", action="store_true",
                           help="emit unprojectable points as black instead of dropping them")

    p = sub.add_parser("evaluate", help="reprojection error report")
    _add_common(p)
    p.add_argument("--in", dest="inp", type=Path, required=True)
    p.add_argument("--pose", type=Path, help="pose file (default: the configured truth pose)")
    p.add_argument("--out", type=Path, help="also write the report here")
    return parser


def _resolve_config(args) -> dataset.RunConfig:
    cfg = dataset.read_config(args.config) if args.config else dataset.RunConfig.from_mapping()
    changes = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        if key.strip() not in dataset.CONFIG_KEYS:
            raise UsageError(f"unknown config key {key.strip()!r}")
        changes[key.strip()] = value
    if args.seed is not None:
        changes["noise_seed" if args.command == "synth" else "rng_seed"] = args.seed
    if args.variant is not None:
        changes["variant"] = args.variant
    if args.width is not None:
        changes["width"] = args.width
    if args.height is not None:
        changes["height"] = args.height
    return cfg.override(**changes) if changes else cfg


def _echo(args, cfg: dataset.RunConfig, extra: dict) -> None:
    print("[effective-config]")
    print(f"command = {args.command}")
    for k, v in extra.items():
        if v is not None:
            print(f"{k} = {v}")
    print(cfg.echo())
    print("[end-config]")


def _pose(args, cfg):
    return dataset.read_pose(args.pose) if args.pose else cfg.truth()


def cmd_synth(args, cfg) -> int:
    meta = args.meta or args.out.with_name(args.out.name + ".meta")
    _echo(args, cfg, {"out": args.out, "meta": meta, "cloud": args.cloud})
    rigs = synthdata.standard_rigs(cfg["disc_radius"])
    layout, truth, noise = cfg.layout(), cfg.truth(), cfg.noise()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cs = synthdata.generate_correspondences(rigs, layout, truth, noise)
    dataset.write_correspondences(cs, args.out)

    lines = [cfg.echo().replace("  # default", ""), f"correspondences = {len(cs)}",
             f"warnings = {len(caught)}"]
    for i, rig in enumerate(rigs):
        for name in ("disc_center", "disc_normal", "up"):
            lines.append(f"rig{i}_{name} = " + ",".join(format(c, ".17g") for c in getattr(rig, name)))
    Path(meta).write_text("\n".join(lines) + "\n")

    if args.cloud:
        returns = [seg.returns(layout.azimuth_step) for rig in rigs for seg in synthdata.scan_target(rig, layout)]
        xyz = np.vstack(returns) if returns else np.empty((0, 3))
        dataset.write_pointcloud(dataset.PointCloud(xyz), args.cloud)
    print(f"wrote {len(cs)} correspondences to {args.out}")
    return EXIT_OK


def cmd_calibrate(args, cfg) -> int:
    _echo(args, cfg, {"in": args.inp, "out": args.out, "trace": args.trace, "init": args.init})
    cs = dataset.read_correspondences(args.inp)
    if not cs:
        raise DataFormatError(f"{args.inp}: no correspondences")
    training = cfg.training()
    if args.init:
        result = calibrator.train(cs, dataset.read_pose(args.init), training)
    else:
        result = calibrator.train_multistart(cs, training)
    if result.trace.status == calibrator.STATUS_DIVERGED and len(result.trace) <= 1:
        raise NumericalFailure("training diverged immediately")
    extras = {"accepted_points": len(cs) - result.skipped_points}
    if result.restart_losses:
        extras["restart_losses"] = ",".join(format(x, ".6e") for x in result.restart_losses)
    dataset.write_result(result, args.out, extras)
    if args.trace:
        dataset.write_trace(result.trace, args.trace)
    p = result.pose.as_vector()
    print("pose = " + ", ".join(f"{n}={v:.6f}" for n, v in zip(calibrator.PARAM_NAMES, p)))
    print(f"final_loss = {result.final_loss:.3e} ({result.trace.status}, {len(result.trace)} iterations)")
    return EXIT_OK


def cmd_gradcheck(args, cfg) -> int:
    seed = cfg["rng_seed"]
    _echo(args, cfg, {"samples": args.samples, "tolerance": args.tolerance, "step": args.step})
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    errs = calibrator.gradient_check(args.samples, seed, args.step, cfg["variant"])
    worst = float(errs.max())
    failed = int(np.count_nonzero(errs >= args.tolerance))
    print(f"samples = {args.samples}\nmax_relative_error = {worst:.3e}\nfailed = {failed}")
    if failed:
        raise NumericalFailure(f"{failed} of {args.samples} samples exceed relative error {args.tolerance}")
    return EXIT_OK


def cmd_project(args, cfg) -> int:
    _echo(args, cfg, {"cloud": args.cloud, "image": args.image, "pose": args.pose, "out": args.out})
    cloud, image = dataset.read_pointcloud(args.cloud), dataset.read_image(args.image)
    overlay = evaluate.project_overlay(cloud, image, _pose(args, cfg))
    dataset.write_image(overlay.image, args.out)
    print(f"drawn = {overlay.drawn}\nskipped = {overlay.skipped}")
    return EXIT_OK


def cmd_colorize(args, cfg) -> int:
    _echo(args, cfg, {"cloud": args.cloud, "image": args.image, "pose": args.pose, "out": args.out,
                      "keep_uncolored": args.keep_uncolored})
    cloud, image = dataset.read_pointcloud(args.cloud), dataset.read_image(args.image)
    res = evaluate.colorize_cloud(cloud, image, _pose(args, cfg), keep_uncolored=args.keep_uncolored)
    dataset.write_pointcloud(res.cloud, args.out)
    print(f"colored = {res.colored}\nuncolored = {res.uncolored}")
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    _echo(args, cfg, {"in": args.inp, "pose": args.pose, "out": args.out})
    cs = dataset.read_correspondences(args.inp)
    report = evaluate.reprojection_report(cs, _pose(args, cfg), cfg["width"], cfg["height"], cfg["variant"])
    text = report.to_text()
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "calibrate": cmd_calibrate,
    "gradcheck": cmd_gradcheck,
    "project": cmd_project,
    "colorize": cmd_colorize,
    "evaluate": cmd_evaluate,
}


def _fail(code: int, exc: Exception) -> int:
    msg = str(exc).replace("\n", " ")
    print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
    return code


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except (NumericalFailure, AllPointsRejected, PoleSingularity, BranchDomain) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (DataFormatError, InvalidArgument, OSError) as exc:
        return _fail(EXIT_DATA, exc)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
