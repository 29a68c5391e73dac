"""Normalized MSE against k for every estimator on a few synthetic regimes.

    python demos/mse_curves.py [--trials 20000] [--out-dir results/]

Prints one table per pair: empirical MSE and, where a closed form exists,
the predicted variance (both divided by the squared true distance).
"""

import argparse
from pathlib import Path

from lpsketch import ExperimentSpec, beta4, generate_pair, run_mse

REGIMES = {
    "dense gamma": ("gamma", {"shape": 2.0, "correlation": 0.3}, 1000),
    "heavy-tailed sparse": ("sparse-overlap", {"sparsity1": 0.01, "sparsity2": 0.01, "overlap": 0.5,
                                               "values": "pareto", "alpha": 2.0}, 10_000),
    "near-identical sparse": ("sparse-overlap", {"sparsity1": 0.0145, "sparsity2": 0.0145, "overlap": 1.0,
                                                 "values": "pareto", "alpha": 2.0,
                                                 "shared": "jitter", "jitter": 0.4}, 10_000),
    "disjoint": ("sparse-overlap", {"overlap": 0.0}, 1000),
}


def show(name, rows, b4):
    print(f"\n{name}  (beta4 = {b4:.4f})")
    print(f"{'estimator':>14} {'k':>6} {'MSE':>12} {'theory':>12}")
    for r in rows:
        theo = "" if r.theoretical_var_norm is None else f"{r.theoretical_var_norm:12.4g}"
        print(f"{r.estimator:>14} {r.k:>6} {r.empirical_mse:12.4g} {theo:>12}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--k-grid", default="10,30,100,300,1000")
    ap.add_argument("--out-dir", default=None, help="also write one CSV per regime here")
    args = ap.parse_args()
    k_grid = [int(k) for k in args.k_grid.split(",")]
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    for i, (name, (kind, params, dim)) in enumerate(REGIMES.items()):
        pair = generate_pair(kind, params, dim, seed=i)
        out = str(out_dir / f"{name.replace(' ', '_')}.csv") if out_dir else None
        rows = run_mse(ExperimentSpec(pair, k_grid, trials=args.trials, master_seed=i, output_path=out))
        show(name, rows, beta4(*pair))


if __name__ == "__main__":
    main()
