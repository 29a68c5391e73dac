"""Monte-Carlo MSE lab.

For a fixed pair, each estimator is run over many independent seeds at every
``k`` of a grid.  Each trial's error is normalized by the true squared distance,
and the result is set beside the closed-form variance where one exists.

Two engines produce the sketches:

``projector``
    Sketches every trial through :mod:`lpsketch.projector` exactly as a user
    would.  Works for every projection distribution, cost ``O(nnz * k)`` per
    trial.

``gaussian``
    For normal projections the sketch rows of a pair are jointly Gaussian
    with covariance equal to the Gram matrix of the powered vectors, so the
    inner products the estimators consume follow a Wishart law.  This engine
    draws them directly (Bartlett decomposition), at a cost independent of
    both ``D`` and ``k``.  It changes how the randomness is produced, not
    the distribution of any estimate.
"""

from dataclasses import dataclass
import csv
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from . import _random
from .estimators import (
    CORES,
    ESTIMATOR_IDS,
    SCHEME_OF,
    THEORETICAL_VARIANCE,
    PairStats,
    sampling_value,
    SAMPLING_STREAM,
)
from .moments import DataVector, aligned_support, compute_moments
from .projector import MARGIN_ORDERS, ProjectionSpec, Scheme, sketch_many

CSV_COLUMNS = ("estimator", "k", "trials", "empirical_mse", "theoretical_var_norm", "bias_sq_norm")
MIN_TRIALS = 100
ENGINES = ("auto", "gaussian", "projector")
_WISHART_STREAM = 0x57A7
_CHUNK_ELEMENTS = 4_000_000


def trial_seeds(master_seed: int, trials: int) -> np.ndarray:
    """Per-trial seeds, a hash of (master seed, trial index)."""
    key = np.uint64(_random.derive_key(master_seed))
    return _random.random_bits(key, np.arange(trials, dtype=np.uint64))


# ---------------------------------------------------------------- gaussian law

class GaussianSketchLaw:
    """Exact joint law of a pair's normal sketch rows.

    Rows that share a projection matrix form one group; within a group the
    rows are ``L g_j`` for i.i.d. standard normal ``g_j``, where ``L L^T`` is
    the Gram matrix of the powered vectors (``L`` comes from a QR
    factorization).  Rows that are bitwise identical (e.g. ``x == y``) are
    mapped to a single row, so they stay identical in every draw.
    """

    def __init__(self, x: DataVector, y: DataVector, scheme: Scheme, max_power: int = 3):
        scheme = Scheme(scheme)
        _, xv, yv = aligned_support(x, y)
        self.scheme = scheme
        self.max_power = max_power
        self.margins_x = {q: math.fsum(x.values ** q) for q in MARGIN_ORDERS}
        self.margins_y = {q: math.fsum(y.values ** q) for q in MARGIN_ORDERS}
        powered = {}
        for r in range(1, max_power + 1):
            powered[f"u{r}"] = xv ** r
            powered[f"v{r}"] = yv ** r
        if scheme is Scheme.ONE:
            groups = [list(powered)]
        else:
            if max_power != 3:
                raise ValueError("the three-matrix scheme supports max_power=3 only")
            # one matrix per cross term: (x^3, y), (x^2, y^2), (x, y^3)
            groups = [["u3", "v1"], ["u2", "v2"], ["u1", "v3"]]
        self._groups = []
        self._where: Dict[str, Tuple[int, int]] = {}
        for gid, labels in enumerate(groups):
            unique: Dict[bytes, int] = {}
            rows = []
            for lab in labels:
                key = powered[lab].tobytes()
                if key not in unique:
                    unique[key] = len(rows)
                    rows.append(powered[lab])
                self._where[lab] = (gid, unique[key])
            a = np.array(rows) if xv.size else np.zeros((len(rows), 0))
            if a.shape[1] == 0:
                factor = np.zeros((a.shape[0], 0))
            else:
                factor = np.linalg.qr(a.T, mode="r").T
            self._groups.append(factor)

    def _wishart(self, gid: int, rank: int, k: int, seeds: np.ndarray) -> np.ndarray:
        n = seeds.size
        keys = _random.derive_keys(seeds, _WISHART_STREAM, gid, k)[:, None]
        if k >= rank:
            tri = np.zeros((n, rank, rank))
            diag_df = k - np.arange(rank)
            chi = _random.chi_squares(diag_df[None, :], keys, np.arange(rank, dtype=np.uint64)[None, :])
            tri[:, np.arange(rank), np.arange(rank)] = np.sqrt(chi)
            il, jl = np.tril_indices(rank, -1)
            if il.size:
                ctr = (rank + il * rank + jl).astype(np.uint64)[None, :]
                tri[:, il, jl] = _random.normals(keys, ctr)
            return tri @ np.swapaxes(tri, 1, 2)
        ctr = np.arange(rank * k, dtype=np.uint64)[None, :]
        g = _random.normals(keys, ctr).reshape(n, rank, k)
        return g @ np.swapaxes(g, 1, 2)

    def draw(self, k: int, seeds) -> PairStats:
        """Sketch statistics for one trial per seed, as a vectorized ``PairStats``."""
        seeds = np.asarray(seeds, dtype=np.uint64)
        grams = []
        for gid, factor in enumerate(self._groups):
            rank = factor.shape[1]
            if rank == 0:
                grams.append(np.zeros((seeds.size, factor.shape[0], factor.shape[0])))
                continue
            w = self._wishart(gid, rank, k, seeds)
            grams.append(factor @ w @ factor.T)

        def ip(a: str, b: str):
            try:
                ga, ia = self._where[a]
                gb, ib = self._where[b]
            except KeyError:
                raise ValueError(f"no sketch row for {a}.{b} at max_power={self.max_power}") from None
            if ga != gb:
                raise ValueError(f"{a} and {b} come from independent matrices")
            return grams[ga][:, ia, ib]

        n = seeds.size
        mx = {q: np.full(n, v) for q, v in self.margins_x.items()}
        my = {q: np.full(n, v) for q, v in self.margins_y.items()}
        return PairStats(ip, k, mx, my)


# ---------------------------------------------------------------- projector path

def projector_stats(x: DataVector, y: DataVector, k: int, seeds, scheme: Scheme,
                    distribution: str = "normal", max_power: int = 3) -> PairStats:
    """Batch ``PairStats`` built by actually sketching both vectors per seed."""
    seeds = [int(s) for s in np.asarray(seeds, dtype=np.uint64)]
    cache: Dict[Tuple[str, str], np.ndarray] = {}
    sketches = []
    for s in seeds:
        spec = ProjectionSpec(s, k, x.dim, scheme, distribution)
        sketches.append(sketch_many([x, y], spec, max_power))

    def ip(a: str, b: str):
        if (a, b) not in cache:
            side = {"u": 0, "v": 1}
            out = np.empty(len(seeds))
            for t, pair in enumerate(sketches):
                ra = pair[side[a[0]]].row(a[0], int(a[1:]))
                rb = pair[side[b[0]]].row(b[0], int(b[1:]))
                out[t] = float(np.dot(ra, rb))
            cache[(a, b)] = out
        return cache[(a, b)]

    n = len(seeds)
    mx = {q: np.full(n, v) for q, v in sketches[0][0].margins.items()} if n else {}
    my = {q: np.full(n, v) for q, v in sketches[0][1].margins.items()} if n else {}
    return PairStats(ip, k, mx, my)


def sampling_trials(x: DataVector, y: DataVector, k: int, seeds) -> np.ndarray:
    """Simple-random-sampling estimates, one per seed (matches ``est_sampling``)."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.empty(seeds.size)
    step = max(1, _CHUNK_ELEMENTS // k)
    ctr = np.arange(k, dtype=np.uint64)[None, :]
    for lo in range(0, seeds.size, step):
        keys = _random.derive_keys(seeds[lo:lo + step], SAMPLING_STREAM)[:, None]
        u = _random.uniforms(keys, ctr)
        idx = np.minimum((u * x.dim).astype(np.int64), x.dim - 1)
        out[lo:lo + step] = sampling_value(x, y, idx)
    return out


# ---------------------------------------------------------------- experiments

@dataclass
class ExperimentSpec:
    pair: Tuple[DataVector, DataVector]
    k_grid: Sequence[int]
    trials: int = 100_000
    estimators: Sequence[str] = ("sampling", "crs-var-only", "3p", "3p-m", "1p", "1p-m", "1p-i")
    distribution: str = "normal"
    master_seed: int = 0
    engine: str = "auto"
    output_path: Optional[str] = None

    def __post_init__(self):
        self.k_grid = [int(k) for k in self.k_grid]
        if not self.k_grid:
            raise ValueError("k grid must not be empty")
        if any(k < 1 for k in self.k_grid) or any(b <= a for a, b in zip(self.k_grid, self.k_grid[1:])):
            raise ValueError("k grid must be positive and strictly increasing")
        if self.trials < MIN_TRIALS:
            raise ValueError(f"need at least {MIN_TRIALS} trials")
        for e in self.estimators:
            if e not in ESTIMATOR_IDS:
                raise ValueError(f"unknown estimator {e!r}")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.engine == "gaussian" and self.distribution != "normal":
            raise ValueError("the gaussian engine only models normal projections")
        x, y = self.pair
        if x.dim != y.dim:
            raise ValueError("pair dimension mismatch")

    @classmethod
    def from_config(cls, cfg: dict, base_dir=None) -> "ExperimentSpec":
        """Build from a plain dict (e.g. parsed JSON).

        ``cfg["pair"]`` is either ``{"generator": kind, "params": {...}, "D": n,
        "seed": s}`` or ``{"file": path, "format": "csv"|"svmlight", "dim": n,
        "rows": [i, j]}``.
        """
        from .io import load_vectors

        cfg = dict(cfg)
        src = cfg.pop("pair")
        if "generator" in src:
            pair = generate_pair(src["generator"], src.get("params", {}), int(src["D"]), int(src.get("seed", 0)))
        else:
            path = Path(src["file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            rows = load_vectors(path, src.get("format"), src.get("dim"))
            i, j = src.get("rows", [0, 1])
            pair = (rows[i], rows[j])
        return cls(pair=pair, **cfg)


@dataclass(frozen=True)
class MseRow:
    estimator: str
    k: int
    trials: int
    empirical_mse: float
    theoretical_var_norm: Optional[float]
    bias_sq_norm: float


def _engine_for(spec: ExperimentSpec) -> str:
    if spec.engine == "auto":
        return "gaussian" if spec.distribution == "normal" else "projector"
    return spec.engine


def estimator_trials(estimator: str, x: DataVector, y: DataVector, k: int, seeds,
                     engine: str = "gaussian", distribution: str = "normal",
                     _laws: Optional[dict] = None) -> np.ndarray:
    """Estimates of one estimator over a batch of seeds."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    if estimator == "sampling":
        return sampling_trials(x, y, k, seeds)
    if estimator == "exact":
        p = 4
        return np.full(seeds.size, compute_moments(x, y).lp(p))
    if estimator not in CORES:
        raise ValueError(f"estimator {estimator!r} has no sketch-based trials")
    scheme = SCHEME_OF[estimator]
    max_power = 5 if estimator == "d6-1p" else 3
    if engine == "projector":
        out = np.empty(seeds.size)
        step = 256
        for lo in range(0, seeds.size, step):
            stats = projector_stats(x, y, k, seeds[lo:lo + step], scheme, distribution, max_power)
            out[lo:lo + step] = CORES[estimator](stats)
        return out
    if engine != "gaussian":
        raise ValueError(f"unknown engine {engine!r}")
    laws = {} if _laws is None else _laws
    key = (scheme, max_power)
    if key not in laws:
        laws[key] = GaussianSketchLaw(x, y, scheme, max_power)
    law = laws[key]
    out = np.empty(seeds.size)
    step = max(1, _CHUNK_ELEMENTS // 200)
    for lo in range(0, seeds.size, step):
        out[lo:lo + step] = CORES[estimator](law.draw(k, seeds[lo:lo + step]))
    return out


def run_mse(spec: ExperimentSpec) -> List[MseRow]:
    x, y = spec.pair
    m = compute_moments(x, y)
    truth = {}
    for e in spec.estimators:
        p = 6 if e == "d6-1p" else 4
        truth[e] = m.lp(p)
        if truth[e] <= 0:
            raise ValueError("the true distance is zero; normalized MSE is undefined")
    engine = _engine_for(spec)
    seeds = trial_seeds(spec.master_seed, spec.trials)
    laws: dict = {}
    rows = []
    for k in spec.k_grid:
        for e in spec.estimators:
            d = truth[e]
            theo_fn = THEORETICAL_VARIANCE.get(e)
            theo = theo_fn(m, k) / d ** 2 if theo_fn is not None else None
            if e == "crs-var-only":
                rows.append(MseRow(e, k, spec.trials, math.nan, theo, math.nan))
                continue
            values = estimator_trials(e, x, y, k, seeds, engine, spec.distribution, laws)
            err = (values - d) / d
            rows.append(MseRow(e, k, spec.trials, float(np.mean(err ** 2)), theo, float(np.mean(err)) ** 2))
    if spec.output_path:
        with open(spec.output_path, "w", newline="") as fh:
            write_mse_csv(rows, fh)
    return rows


def _num(v: Optional[float]) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.17g}"


def write_mse_csv(rows: Sequence[MseRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.estimator, r.k, r.trials, _num(r.empirical_mse), _num(r.theoretical_var_norm), _num(r.bias_sq_norm)])


def read_mse_csv(fh: TextIO) -> List[MseRow]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    out = []
    for rec in reader:
        theo = rec["theoretical_var_norm"]
        out.append(MseRow(rec["estimator"], int(rec["k"]), int(rec["trials"]), float(rec["empirical_mse"]),
                          float(theo) if theo else None, float(rec["bias_sq_norm"])))
    return out


# ---------------------------------------------------------------- synthetic pairs

def _values(rng: np.random.Generator, n: int, params: dict) -> np.ndarray:
    dist = params.get("values", "lognormal")
    if dist == "lognormal":
        return rng.lognormal(0.0, float(params.get("sigma", 1.0)), n)
    if dist == "pareto":
        return 1.0 + rng.pareto(float(params.get("alpha", 2.5)), n)
    if dist == "exponential":
        return rng.exponential(1.0, n)
    if dist == "poisson":
        # word-count-like values, never zero
        return 1.0 + rng.poisson(float(params.get("lam", 1.0)), n).astype(float)
    raise ValueError(f"unknown value distribution {dist!r}")


def generate_pair(kind: str, params: dict, dim: int, seed: int) -> Tuple[DataVector, DataVector]:
    """Deterministic synthetic pair.

    ``gamma`` / ``beta``
        dense nonnegative vectors with i.i.d. entries; ``correlation`` in
        [0, 1] mixes a shared component into ``y``.
    ``sparse-overlap``
        nonnegative sparse vectors with ``sparsity1``, ``sparsity2`` (fractions
        of ``dim``) and ``overlap`` (shared support as a fraction of the
        smaller one).  ``shared`` picks how values on common coordinates
        relate: ``independent``, ``identical`` or ``jitter`` (multiplicative
        lognormal noise of scale ``jitter``).
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    rng = np.random.default_rng(seed)
    params = dict(params or {})
    if kind in ("gamma", "beta"):
        if kind == "gamma":
            shape, scale = float(params.get("shape", 2.0)), float(params.get("scale", 1.0))
            if shape <= 0 or scale <= 0:
                raise ValueError("gamma needs positive shape and scale")
            draw = lambda: rng.gamma(shape, scale, dim)
        else:
            a, b = float(params.get("a", 2.0)), float(params.get("b", 5.0))
            if a <= 0 or b <= 0:
                raise ValueError("beta needs positive a and b")
            draw = lambda: rng.beta(a, b, dim)
        rho = float(params.get("correlation", 0.0))
        if not 0.0 <= rho <= 1.0:
            raise ValueError("correlation must lie in [0, 1]")
        x = draw()
        y = rho * x + (1.0 - rho) * draw()
        return DataVector.dense(x), DataVector.dense(y)
    if kind == "sparse-overlap":
        s1, s2 = float(params.get("sparsity1", 0.05)), float(params.get("sparsity2", 0.05))
        overlap = float(params.get("overlap", 0.5))
        if not (0 < s1 <= 1 and 0 < s2 <= 1):
            raise ValueError("sparsities must lie in (0, 1]")
        if not 0 <= overlap <= 1:
            raise ValueError("infeasible overlap: must not exceed the smaller support")
        n1, n2 = max(1, round(s1 * dim)), max(1, round(s2 * dim))
        common = round(overlap * min(n1, n2))
        if n1 + n2 - common > dim:
            raise ValueError("infeasible overlap: supports do not fit in dim")
        perm = rng.permutation(dim)
        shared_idx = perm[:common]
        only_x = perm[common:n1]
        only_y = perm[n1:n1 + n2 - common]
        x = np.zeros(dim)
        y = np.zeros(dim)
        x[shared_idx] = _values(rng, common, params)
        x[only_x] = _values(rng, only_x.size, params)
        mode = params.get("shared", "independent")
        if mode == "identical":
            y[shared_idx] = x[shared_idx]
        elif mode == "jitter":
            y[shared_idx] = x[shared_idx] * rng.lognormal(0.0, float(params.get("jitter", 0.05)), common)
        elif mode == "independent":
            y[shared_idx] = _values(rng, common, params)
        else:
            raise ValueError(f"unknown shared mode {mode!r}")
        y[only_y] = _values(rng, only_y.size, params)
        if params.get("signed", False):
            x_signs = rng.choice([-1.0, 1.0], dim)
            y_signs = rng.choice([-1.0, 1.0], dim)
            y_signs[shared_idx] = x_signs[shared_idx]
            x *= x_signs
            y *= y_signs
        return DataVector.dense(x), DataVector.dense(y)
    raise ValueError(f"unknown generator kind {kind!r}")
