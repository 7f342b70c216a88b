"""Blind filter recovery on the synthetic benchmark.

    python scripts/blind_recovery.py --seeds 10 [--gamma 0.25] [--clip 0.1] [--order 2]

Prints the recovery error (median |dB| over bins with true gain above -40 dB)
for each seed and the median over seeds.
"""

import argparse
import time

import numpy as np

from geneq.benchmark import blind_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--gamma", type=float, default=0.25, help="noise-regularization scale")
    ap.add_argument("--clip", type=float, default=0.0, help="fraction of observation samples hard-clipped")
    ap.add_argument("--steps", type=int, default=51)
    ap.add_argument("--order", type=int, default=2, choices=(1, 2))
    ap.add_argument("--churn", type=float, default=10.0)
    ap.add_argument("--iterations", type=int, default=100)
    ap.add_argument("--weighting", default="inverse", choices=("inverse", "flat"))
    args = ap.parse_args()

    errs = []
    t0 = time.perf_counter()
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        e = blind_trial(seed, args.gamma, args.clip, args.steps, args.order, args.churn, args.iterations,
                        args.weighting)
        errs.append(e)
        print(f"seed {seed:3d}  error {e:5.2f} dB")
    print(f"median {np.median(errs):.2f} dB, mean {np.mean(errs):.2f} dB, "
          f"{np.sum(np.asarray(errs) <= 3.0)}/{len(errs)} within 3 dB, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
