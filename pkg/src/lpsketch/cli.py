"""Command-line entry point: ``lpsketch <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

import argparse
import csv
import json
import os
from pathlib import Path
import sys
from typing import List, Optional, Sequence

from .estimators import (
    CORES,
    DEFAULT_TAU,
    PairStats,
    SCHEME_OF,
    THEORETICAL_VARIANCE,
    Estimate,
    est_exact,
    est_sampling,
    select_estimator,
)
from .io import FORMATS, DatasetError, load_dataset
from .knn import LabeledDataset, knn_repeat, p_sweep, write_knn_csv
from .moments import HOUSED_PAIRS, SUPPORTED_P, beta4, compute_moments
from .projector import (
    ProjectionSpec,
    Scheme,
    SketchFormatError,
    load_sketches,
    sketch_many,
    write_sketches,
)
from .simlab import ENGINES, ExperimentSpec, run_mse, trial_seeds, write_mse_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3
SEED_ENV = "LPSKETCH_SEED"
CLI_ESTIMATORS = ("sampling", "3p", "3p-m", "1p", "1p-m", "1p-i", "auto", "exact", "d6-1p")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{float(v):.17g}"


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _threads(args) -> int:
    return args.threads or os.cpu_count() or 1


def _load_pair(args):
    """Two vectors from one file (rows given by --rows) or from two files."""
    i, j = args.rows
    if len(args.data) == 1:
        rows, _ = load_dataset(args.data[0], args.format, args.dim)
        src = (rows, rows)
    else:
        src = (load_dataset(args.data[0], args.format, args.dim)[0],
               load_dataset(args.data[1], args.format, args.dim)[0])
    try:
        x, y = src[0][i], src[1][j]
    except IndexError:
        raise DatasetError(f"row index out of range (rows {i}, {j})") from None
    if x.dim != y.dim:
        raise DatasetError(f"dimension mismatch: {x.dim} != {y.dim}")
    return x, y


def _add_data_args(p: argparse.ArgumentParser, nargs="+"):
    p.add_argument("data", nargs=nargs, help="one file holding both rows, or two files")
    p.add_argument("--rows", nargs=2, type=int, default=None, metavar=("I", "J"),
                   help="row of each input (default: 0 1 for one file, 0 0 for two)")
    p.add_argument("--format", choices=FORMATS, default=None, help="input format (default: from suffix)")
    p.add_argument("--dim", type=int, default=None, help="dimension (svmlight; default: largest index)")


def _fix_rows(args):
    if args.data and len(args.data) > 2:
        raise UsageError("give one or two data files")
    if args.rows is None:
        args.rows = [0, 1] if len(args.data) == 1 else [0, 0]


# ---------------------------------------------------------------- commands

def cmd_moments(args, out) -> int:
    _fix_rows(args)
    x, y = _load_pair(args)
    m = compute_moments(x, y)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["name", "value"])
    w.writerow(["dim", m.dim])
    w.writerow(["nnz_x", m.nnz_x])
    w.writerow(["nnz_y", m.nnz_y])
    for a, b in HOUSED_PAIRS:
        w.writerow([f"S{a}{b}", _fmt(m.s(a, b))])
    for p in SUPPORTED_P:
        w.writerow([f"l{p}", _fmt(m.lp(p))])
    w.writerow(["beta4", _fmt(beta4(m)) if m.x(4) + m.y(4) > 0 else "nan"])
    return EXIT_OK


def cmd_sketch(args, out) -> int:
    rows, _ = load_dataset(args.data, args.format, args.dim)
    if not rows:
        raise DatasetError("no rows to sketch", args.data)
    spec = ProjectionSpec(_seed(args), args.k, rows[0].dim, Scheme(args.scheme), args.dist)
    sketches = sketch_many(rows, spec, args.max_power)
    if args.output:
        with open(args.output, "w", encoding="ascii", newline="\n") as fh:
            write_sketches(sketches, fh)
    else:
        write_sketches(sketches, out)
    return EXIT_OK


def _estimate_from_sketches(args, estimator: str) -> Estimate:
    sketches = {s.vector_id: s for s in load_sketches(args.sketches)}
    ids = args.ids or ["0", "1"]
    try:
        sx, sy = sketches[ids[0]], sketches[ids[1]]
    except KeyError as exc:
        raise DatasetError(f"no sketch with id {exc.args[0]!r}", args.sketches) from None
    if estimator == "auto":
        return select_estimator(sx, sy, args.tau)
    if estimator not in CORES:
        raise UsageError(f"estimator {estimator} needs raw data, not sketches")
    if sx.spec.scheme is not SCHEME_OF[estimator]:
        raise DatasetError(f"estimator {estimator} needs {SCHEME_OF[estimator].value} sketches", args.sketches)
    if estimator == "d6-1p" and sx.max_power < 5:
        raise DatasetError("the l6 estimator needs sketches with max power 5", args.sketches)
    value = float(CORES[estimator](PairStats.from_sketches(sx, sy)))
    return Estimate(estimator, value, None, sx.k, 6 if estimator == "d6-1p" else 4)


def _estimate_from_data(args, estimator: str, p: int) -> Estimate:
    _fix_rows(args)
    x, y = _load_pair(args)
    if estimator == "exact":
        return est_exact(x, y, p)
    if args.k is None:
        raise UsageError("-k is required for estimated distances")
    seed = _seed(args)
    if estimator == "sampling":
        return est_sampling(x, y, args.k, seed)
    m = compute_moments(x, y)
    scheme = Scheme.ONE if estimator == "auto" else SCHEME_OF[estimator]
    max_power = 5 if estimator == "d6-1p" else 3
    spec = ProjectionSpec(seed, args.k, x.dim, scheme, args.dist)
    sx, sy = sketch_many([x, y], spec, max_power, ["x", "y"])
    if estimator == "auto":
        return select_estimator(sx, sy, args.tau, m)
    value = float(CORES[estimator](PairStats.from_sketches(sx, sy)))
    var_fn = THEORETICAL_VARIANCE.get(estimator)
    return Estimate(estimator, value, var_fn(m, args.k) if var_fn else None, args.k, p)


def cmd_estimate(args, out) -> int:
    estimator = args.estimator
    p = args.p if args.p is not None else (6 if estimator == "d6-1p" else 4)
    if p == 6 and estimator not in ("d6-1p", "exact"):
        raise UsageError(f"--p 6 is only available for d6-1p and exact, not {estimator}")
    if estimator == "d6-1p" and p != 6:
        raise UsageError("d6-1p estimates the l6 distance; use --p 6")
    if args.k is not None and args.k < 1:
        raise UsageError("-k must be positive")
    if args.sketches:
        if args.data:
            raise UsageError("give either data files or --sketches, not both")
        est = _estimate_from_sketches(args, estimator)
    else:
        if not args.data:
            raise UsageError("give data files or --sketches")
        est = _estimate_from_data(args, estimator, p)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["estimator", "value", "variance", "k", "p", "branch"])
    w.writerow([est.estimator, _fmt(est.value), _fmt(est.variance), est.k, est.p, est.branch or ""])
    return EXIT_OK


def _parse_params(items: Sequence[str]) -> dict:
    params = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = float(val)
        except ValueError:
            params[key] = val
    return params


def cmd_mse(args, out) -> int:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"bad JSON ({exc.msg})", args.config, exc.lineno) from None
        if not isinstance(cfg, dict) or "pair" not in cfg:
            raise DatasetError("config must be an object with a 'pair' entry", args.config)
        spec = ExperimentSpec.from_config(cfg, Path(args.config).parent)
    else:
        if args.generator:
            pair_cfg = {"generator": args.generator, "params": _parse_params(args.param),
                        "D": args.D, "seed": args.pair_seed}
        elif args.data:
            pair_cfg = {"file": args.data, "format": args.format, "dim": args.dim, "rows": args.rows or [0, 1]}
        else:
            raise UsageError("give --config, --generator or --data")
        if not args.k_grid:
            raise UsageError("--k-grid is required without --config")
        cfg = {"pair": pair_cfg, "k_grid": args.k_grid, "trials": args.trials,
               "distribution": args.dist, "master_seed": _seed(args), "engine": args.engine}
        if args.estimators:
            cfg["estimators"] = args.estimators.split(",")
        spec = ExperimentSpec.from_config(cfg)
    if args.output:
        spec.output_path = args.output
    rows = run_mse(spec)
    if not args.output:
        write_mse_csv(rows, out)
    return EXIT_OK


def cmd_knn(args, out) -> int:
    train_rows, train_labels = load_dataset(args.train, args.format, args.dim, has_label=True)
    test_rows, test_labels = load_dataset(args.test, args.format, args.dim or train_rows[0].dim, has_label=True)
    if train_labels is None or test_labels is None:
        raise DatasetError("k-NN needs labeled data (a 'label' column or svmlight labels)")
    ds = LabeledDataset.from_split(train_rows, train_labels, test_rows, test_labels)
    if args.estimator == "exact":
        results = p_sweep(ds, args.m, args.p)
    else:
        if args.k is None:
            raise UsageError("-k is required for estimated distances")
        seeds = trial_seeds(_seed(args), args.repeats)
        results = [knn_repeat(ds, m, p, args.estimator, args.k, seeds, args.dist, _threads(args))
                   for m in args.m for p in args.p]
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_knn_csv(results, fh)
    else:
        write_knn_csv(results, out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    from .verify import run_checks

    results = run_checks()
    for r in results:
        out.write(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}\n")
    failed = sum(not r.passed for r in results)
    out.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lpsketch", description="Estimate l4/l6 distances from random projection sketches.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for k-NN seed repeats (default: all cores)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def seed_arg(p):
        p.add_argument("--seed", type=int, default=None, help=f"projection seed (default: ${SEED_ENV} or 0)")

    def dist_arg(p):
        p.add_argument("--dist", default="normal", help="normal, 3pt or sparse:<s> (default: normal)")

    p = sub.add_parser("moments", help="exact moment table, lp distances and beta4 for a pair")
    _add_data_args(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("sketch", help="sketch every row of a data file")
    p.add_argument("data")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("-k", type=int, required=True, help="number of projections")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="1p")
    p.add_argument("--max-power", type=int, choices=(3, 5), default=3)
    p.add_argument("-o", "--output", default=None, help="sketch file (default: stdout)")
    seed_arg(p)
    dist_arg(p)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("estimate", help="estimate the distance between two vectors")
    _add_data_args(p, nargs="*")
    p.add_argument("--sketches", default=None, help="read a sketch file instead of raw data")
    p.add_argument("--ids", nargs=2, default=None, metavar=("ID_X", "ID_Y"),
                   help="vector ids inside --sketches (default: 0 1)")
    p.add_argument("--estimator", choices=CLI_ESTIMATORS, default="1p",
                   help="'auto' is experimental: picks 1p-i when the plug-in beta4 exceeds --tau")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="threshold for --estimator auto (experimental)")
    p.add_argument("-k", type=int, default=None, help="number of projections or samples")
    p.add_argument("--p", type=int, choices=(4, 6), default=None)
    seed_arg(p)
    dist_arg(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mse", help="Monte-Carlo normalized MSE against k")
    p.add_argument("--config", default=None, help="JSON experiment file")
    p.add_argument("--generator", choices=("gamma", "beta", "sparse-overlap"), default=None)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="generator parameter")
    p.add_argument("-D", type=int, default=1000, help="generated dimension")
    p.add_argument("--pair-seed", type=int, default=0, help="generator seed")
    p.add_argument("--data", default=None, help="take the pair from a data file")
    p.add_argument("--rows", nargs=2, type=int, default=None, metavar=("I", "J"))
    p.add_argument("--format", choices=FORMATS, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--k-grid", type=_int_list, default=None, help="e.g. 10,100,1000")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--estimators", default=None, help="comma-separated estimator ids")
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("-o", "--output", default=None)
    seed_arg(p)
    dist_arg(p)
    p.set_defaults(func=cmd_mse)

    p = sub.add_parser("knn", help="m-nearest-neighbour error rates")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--m", type=_int_list, default=[1], help="neighbour counts, e.g. 1,5,10")
    p.add_argument("--p", type=_int_list, default=[4], help="distance orders, e.g. 2,4,6")
    p.add_argument("--estimator", choices=("exact",) + tuple(CORES) + ("sampling",), default="exact")
    p.add_argument("-k", type=int, default=None)
    p.add_argument("--repeats", type=int, default=10, help="projection seeds to average over")
    p.add_argument("-o", "--output", default=None)
    seed_arg(p)
    dist_arg(p)
    p.set_defaults(func=cmd_knn)

    p = sub.add_parser("verify", help="run the built-in property checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"lpsketch: error: {exc}\n")
        return EXIT_USAGE
    except (DatasetError, SketchFormatError, OSError) as exc:
        sys.stderr.write(f"lpsketch: {exc}\n")
        return EXIT_DATA
    except ValueError as exc:
        sys.stderr.write(f"lpsketch: invalid input: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
