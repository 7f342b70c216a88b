"""Write Gaussian-prior clips with a music-like spectrum as WAV files.

    python scripts/make_synthetic_corpus.py OUT_DIR --count 4 --seconds 3
"""

import argparse
from pathlib import Path

import numpy as np

from geneq.benchmark import BENCH_RATE, benchmark_prior
from geneq.dsp import Signal, next_pow2
from geneq.wavio import write_wav


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--count", type=int, default=4)
    ap.add_argument("--seconds", type=float, default=3.0)
    ap.add_argument("--sample-rate", type=int, default=BENCH_RATE)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = int(round(args.seconds * args.sample_rate))
    prior = benchmark_prior(next_pow2(n), args.sample_rate)
    rng = np.random.default_rng(args.seed)
    for k in range(args.count):
        x = prior.sample(next_pow2(n), rng)[:n]
        path = out / f"clip_{k:03d}.wav"
        write_wav(path, Signal(x, args.sample_rate))
        print(path)


if __name__ == "__main__":
    main()
