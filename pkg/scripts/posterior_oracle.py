"""Non-blind sampler output against the closed-form Wiener posterior mean.

    python scripts/posterior_oracle.py --steps 21 31 41 51 --seeds 10 [--order 1] [--churn 0]

The error should fall as the number of steps grows.
"""

import argparse

import numpy as np

from geneq.benchmark import nonblind_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, nargs="+", default=[21, 31, 41, 51])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--order", type=int, default=1, choices=(1, 2))
    ap.add_argument("--churn", type=float, default=0.0)
    args = ap.parse_args()

    print("steps  median rel L2")
    for t in args.steps:
        errs = [nonblind_trial(s, steps=t, order=args.order, s_churn=args.churn) for s in range(args.seeds)]
        print(f"{t:5d}  {np.median(errs) * 100:6.2f}%")


if __name__ == "__main__":
    main()
