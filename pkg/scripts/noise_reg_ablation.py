"""Recovery error with and without noise regularization, optionally on clipped observations.

    python scripts/noise_reg_ablation.py --seeds 10 --clip 0.1 --gammas 0 0.05 0.25
"""

import argparse

import numpy as np

from geneq.benchmark import blind_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--clip", type=float, default=0.1)
    ap.add_argument("--gammas", type=float, nargs="+", default=[0.0, 0.25])
    args = ap.parse_args()

    table = {g: [blind_trial(s, noise_reg_gamma=g, clip_fraction=args.clip) for s in range(args.seeds)]
             for g in args.gammas}
    print("gamma   median   mean    worst")
    for g, errs in table.items():
        print(f"{g:5.2f}  {np.median(errs):6.2f}  {np.mean(errs):6.2f}  {np.max(errs):6.2f}")
    print("per-seed errors (dB):")
    for g, errs in table.items():
        print(f"  gamma {g:.2f}: {np.round(errs, 2).tolist()}")


if __name__ == "__main__":
    main()
