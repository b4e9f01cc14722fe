"""Error of the affine chord-to-pixel mapping against the exact projection.

    python3 scripts/chord_approximation.py [--radius 0.3] [--distances 4 6 8 12 16 24]

The target faces the camera at the given azimuth/elevation in the LiDAR frame.
"""

import argparse
import math

import numpy as np

from panocalib.geometry import transform
from panocalib.synthdata import (
    REFERENCE_POSE,
    ScanLayout,
    TargetRig,
    chord_pixel_endpoints,
    exact_pixel_endpoints,
    scan_target,
    simulate_circle_detection,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--radius", type=float, default=0.3)
    ap.add_argument("--azimuth", type=float, default=-30.0, help="degrees")
    ap.add_argument("--elevation", type=float, default=1.0, help="degrees")
    ap.add_argument("--distances", type=float, nargs="+", default=[4, 6, 8, 12, 16, 24])
    ap.add_argument("--width", type=int, default=4096)
    ap.add_argument("--height", type=int, default=2048)
    args = ap.parse_args()

    az, el = math.radians(args.azimuth), math.radians(args.elevation)
    direction = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    print("dist_m  subtense_deg  chords  max_err_px")
    for dist in args.distances:
        rig = TargetRig.facing_camera(dist * direction, args.radius, REFERENCE_POSE)
        det = simulate_circle_detection(rig, REFERENCE_POSE)
        cam_range = np.linalg.norm(transform(dist * direction, REFERENCE_POSE))
        subtense = 2 * math.degrees(math.asin(min(1.0, args.radius / cam_range)))
        segs = scan_target(rig, ScanLayout())
        worst = 0.0
        for seg in segs:
            for p, q in zip(chord_pixel_endpoints(seg, det.center, det.radius, rig),
                            exact_pixel_endpoints(seg, REFERENCE_POSE)):
                worst = max(worst, abs(math.remainder(p.u - q.u, 1.0)) * args.width,
                            abs(p.v - q.v) * args.height)
        print(f"{dist:6.1f}  {subtense:12.2f}  {len(segs):6d}  {worst:10.3f}")


if __name__ == "__main__":
    main()
