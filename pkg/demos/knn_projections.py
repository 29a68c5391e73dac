"""k-NN error with estimated l4 distances as the number of projections grows.

    python demos/knn_projections.py [--repeats 20] [--m 15]

Uses the synthetic two-class vocabulary dataset (D = 500, 400/400 split) and
compares each estimator against exact-distance k-NN.
"""

import argparse

from lpsketch import knn_classify, knn_repeat
from lpsketch.knn import vocabulary_dataset
from lpsketch.simlab import trial_seeds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--m", type=int, default=15)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    ds = vocabulary_dataset(400, 400, seed=2024)
    exact = knn_classify(ds, args.m, 4).error_rate
    print(f"exact l4 error with m={args.m}: {exact:.4f}")
    seeds = trial_seeds(7, args.repeats)
    print(f"{'k':>6} {'1p':>14} {'1p-m':>14} {'3p':>14}")
    for k in (16, 64, 256, 512, 1024):
        cells = []
        for est in ("1p", "1p-m", "3p"):
            r = knn_repeat(ds, args.m, 4, est, k, seeds, threads=args.threads)
            cells.append(f"{r.error_rate:.4f}±{r.std_error:.3f}")
        print(f"{k:>6} " + " ".join(f"{c:>14}" for c in cells))


if __name__ == "__main__":
    main()
