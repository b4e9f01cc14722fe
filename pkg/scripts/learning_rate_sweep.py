"""Fixed-step sensitivity: loss reduction after 100 iterations and trace monotonicity.

    python3 scripts/learning_rate_sweep.py [--rates 0.1 1 10 100 300 1000] [--rotation-scale 0.05]

Starts from a perturbation of the reference pose on the noiseless 48-point set.
"""

import argparse

import numpy as np

from panocalib.calibrator import TrainingConfig, train
from panocalib.geometry import ExtrinsicPose
from panocalib.synthdata import REFERENCE_POSE, standard_dataset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rates", type=float, nargs="+", default=[0.1, 1, 10, 100, 300, 1000])
    ap.add_argument("--rotation-scale", type=float, nargs="+", default=[1.0, 0.05])
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    cs = standard_dataset()
    rng = np.random.default_rng(args.seed)
    start = REFERENCE_POSE.as_vector() + np.concatenate([rng.uniform(-0.2, 0.2, 3), rng.uniform(-0.3, 0.3, 3)])
    init = ExtrinsicPose.from_vector(start)

    print("lr        rot_scale  loss[100]/loss[0]  final_loss  monotone  status")
    for scale in args.rotation_scale:
        for lr in args.rates:
            cfg = TrainingConfig(learning_rate=lr, rotation_rate_scale=scale, max_iterations=args.iterations)
            res = train(cs, init, cfg)
            losses = np.asarray(res.trace.losses)
            ratio = losses[min(100, len(losses) - 1)] / losses[0]
            monotone = bool(np.all(np.diff(losses) <= 0))
            print(f"{lr:<9g} {scale:<10g} {ratio:17.2e}  {res.final_loss:10.2e}  {str(monotone):8s}  "
                  f"{res.trace.status}")


if __name__ == "__main__":
    main()
