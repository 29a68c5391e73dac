"""m-nearest-neighbour classification over exact or estimated lp distances."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import csv
from typing import Iterator, List, Optional, Sequence, TextIO

import numpy as np

from .estimators import CORES, SCHEME_OF, PairStats, sampling_indices
from .moments import DataVector, SUPPORTED_P
from .projector import ProjectionSpec, sketch_many

CSV_COLUMNS = ("m", "p", "distance_source", "k", "seed_repeats", "mean_error", "std_error")


@dataclass
class LabeledDataset:
    rows: List[DataVector]
    labels: np.ndarray
    train: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        self.train = np.asarray(self.train, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)
        if len(self.rows) != len(self.labels):
            raise ValueError("rows and labels differ in length")
        if np.intersect1d(self.train, self.test).size:
            raise ValueError("train and test sets overlap")
        dims = {r.dim for r in self.rows}
        if len(dims) > 1:
            raise ValueError("rows have different dimensions")

    @classmethod
    def from_split(cls, train_rows, train_labels, test_rows, test_labels) -> "LabeledDataset":
        rows = list(train_rows) + list(test_rows)
        labels = np.concatenate([np.asarray(train_labels), np.asarray(test_labels)])
        n = len(train_rows)
        return cls(rows, labels, np.arange(n), np.arange(n, len(rows)))

    @property
    def dim(self) -> int:
        return self.rows[0].dim


@dataclass(frozen=True)
class DistanceSource:
    """``exact`` or an estimator with its projection settings."""

    estimator: str = "exact"
    k: int = 0
    seed: int = 0
    distribution: str = "normal"

    def __post_init__(self):
        if self.estimator != "exact":
            if self.estimator not in CORES and self.estimator != "sampling":
                raise ValueError(f"estimator {self.estimator!r} cannot drive k-NN")
            if self.k < 1:
                raise ValueError("estimated distances need k >= 1")

    @property
    def label(self) -> str:
        return self.estimator


EXACT = DistanceSource()


@dataclass(frozen=True)
class KnnResult:
    m: int
    p: int
    source: DistanceSource
    error_rate: float
    per_repeat: tuple = ()

    @property
    def std_error(self) -> float:
        """Standard deviation of the error rate across seed repeats."""
        if len(self.per_repeat) < 2:
            return 0.0
        return float(np.std(self.per_repeat, ddof=1))


def _dense_matrix(rows: Sequence[DataVector]) -> np.ndarray:
    out = np.zeros((len(rows), rows[0].dim))
    for i, r in enumerate(rows):
        out[i, r.indices] = r.values
    return out


def _exact_rows(ds: LabeledDataset, p: int) -> Iterator[np.ndarray]:
    train = _dense_matrix([ds.rows[i] for i in ds.train])
    for t in ds.test:
        x = ds.rows[t].to_dense()
        yield np.sum(np.abs(train - x) ** p, axis=1)


def _sampled_rows(ds: LabeledDataset, src: DistanceSource, p: int) -> Iterator[np.ndarray]:
    idx = sampling_indices(src.seed, ds.dim, src.k)
    cols = _dense_matrix(ds.rows)[:, idx]
    train = cols[ds.train]
    for t in ds.test:
        yield ds.dim / src.k * np.sum(np.abs(train - cols[t]) ** p, axis=1)


def _estimated_rows(ds: LabeledDataset, src: DistanceSource, p: int) -> Iterator[np.ndarray]:
    expected_p = 6 if src.estimator == "d6-1p" else 4
    if p != expected_p:
        raise ValueError(f"estimator {src.estimator} estimates l{expected_p}, not l{p}")
    max_power = 5 if src.estimator == "d6-1p" else 3
    spec = ProjectionSpec(src.seed, src.k, ds.dim, SCHEME_OF[src.estimator], src.distribution)
    sketches = sketch_many(ds.rows, spec, max_power)
    rows = {(side, r): np.stack([s.row(side, r) for s in sketches])
            for side in "uv" for r in range(1, max_power + 1)}
    margins = {q: np.array([s.margins[q] for s in sketches]) for q in sketches[0].margins}
    train = ds.train
    v_cache = {}
    core = CORES[src.estimator]

    for t in ds.test:
        def ip(a: str, b: str, t=t):
            pa, pb = rows[(a[0], int(a[1:]))], rows[(b[0], int(b[1:]))]
            if a[0] == "u" and b[0] == "u":
                return float(np.dot(pa[t], pb[t]))
            if a[0] == "v" and b[0] == "v":
                if (a, b) not in v_cache:
                    v_cache[(a, b)] = np.einsum("ij,ij->i", pa[train], pb[train])
                return v_cache[(a, b)]
            if a[0] == "u":
                return pb[train] @ pa[t]
            return pa[train] @ pb[t]

        mx = {q: float(v[t]) for q, v in margins.items()}
        my = {q: v[train] for q, v in margins.items()}
        yield np.asarray(core(PairStats(ip, src.k, mx, my)), dtype=np.float64)


def distance_rows(ds: LabeledDataset, p: int, source: DistanceSource = EXACT) -> Iterator[np.ndarray]:
    """Distances from each test row to every training row, one test row at a time."""
    if p not in SUPPORTED_P:
        raise ValueError(f"unsupported p={p}")
    if source.estimator == "exact":
        return _exact_rows(ds, p)
    if source.estimator == "sampling":
        return _sampled_rows(ds, source, p)
    return _estimated_rows(ds, source, p)


def vote(distances: np.ndarray, labels: np.ndarray, m: int):
    """Majority label among the ``m`` nearest.

    Neighbours are ordered by distance, then label.  Ties in the vote go to
    the class with the smallest summed neighbour distance, then the lowest
    class id.
    """
    order = np.lexsort((labels, distances))[:m]
    nn_labels, nn_dist = labels[order], distances[order]
    classes, counts = np.unique(nn_labels, return_counts=True)
    best = counts.max()
    tied = classes[counts == best]
    if tied.size == 1:
        return tied[0]
    sums = np.array([nn_dist[nn_labels == c].sum() for c in tied])
    return tied[np.flatnonzero(sums == sums.min())[0]]


def predict(ds: LabeledDataset, m: int, p: int = 4, source: DistanceSource = EXACT) -> np.ndarray:
    if ds.train.size == 0:
        raise ValueError("empty training set")
    if not 1 <= m <= ds.train.size:
        raise ValueError(f"m={m} must lie in [1, {ds.train.size}]")
    train_labels = ds.labels[ds.train]
    return np.array([vote(d, train_labels, m) for d in distance_rows(ds, p, source)])


def knn_classify(ds: LabeledDataset, m: int, p: int = 4, source: DistanceSource = EXACT) -> KnnResult:
    pred = predict(ds, m, p, source)
    err = float(np.mean(pred != ds.labels[ds.test])) if ds.test.size else 0.0
    return KnnResult(m, p, source, err, (err,))


def knn_repeat(ds: LabeledDataset, m: int, p: int, estimator: str, k: int, seeds: Sequence[int],
               distribution: str = "normal", threads: Optional[int] = None) -> KnnResult:
    """Error rate of estimated-distance k-NN averaged over projection seeds."""
    sources = [DistanceSource(estimator, k, int(s), distribution) for s in seeds]
    with ThreadPoolExecutor(max_workers=threads or 1) as pool:
        errors = list(pool.map(lambda s: knn_classify(ds, m, p, s).error_rate, sources))
    src = DistanceSource(estimator, k, int(seeds[0]) if len(seeds) else 0, distribution)
    return KnnResult(m, p, src, float(np.mean(errors)), tuple(errors))


def p_sweep(ds: LabeledDataset, m_list: Sequence[int], p_list: Sequence[int]) -> List[KnnResult]:
    """Exact-distance error rate for every (m, p)."""
    for p in p_list:
        if p not in SUPPORTED_P:
            raise ValueError(f"p={p} is not supported; use even p in {SUPPORTED_P}")
    return [knn_classify(ds, m, p) for m in m_list for p in p_list]


def vocabulary_dataset(n_train: int, n_test: int, dim: int = 500, nnz: int = 25,
                       own_fraction: float = 0.45, vocab_size: int = 150, seed: int = 0,
                       normalize: bool = True) -> LabeledDataset:
    """Two-class sparse nonnegative data shaped like bag-of-words rows.

    Each class owns ``vocab_size`` coordinates; the rest of ``dim`` is shared.
    A row draws about ``own_fraction * nnz`` coordinates from its class
    vocabulary and the remainder from the shared pool, with lognormal values,
    then is scaled to unit l2 norm when ``normalize`` is set.
    """
    if 2 * vocab_size >= dim:
        raise ValueError("two vocabularies must leave a shared pool")
    if not 0.0 <= own_fraction <= 1.0:
        raise ValueError("own_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    labels = np.arange(n) % 2
    shared = np.arange(2 * vocab_size, dim)
    if nnz > min(vocab_size, shared.size):
        raise ValueError("nnz does not fit in the vocabularies")
    rows = []
    for c in labels:
        n_own = rng.binomial(nnz, own_fraction)
        idx = np.concatenate([
            c * vocab_size + rng.choice(vocab_size, n_own, replace=False),
            rng.choice(shared, nnz - n_own, replace=False),
        ])
        idx.sort()
        vals = rng.lognormal(0.0, 0.5, idx.size)
        if normalize:
            vals /= np.linalg.norm(vals)
        rows.append(DataVector.sparse(dim, idx, vals))
    perm = rng.permutation(n)
    return LabeledDataset([rows[i] for i in perm], labels[perm], np.arange(n_train), np.arange(n_train, n))


def write_knn_csv(results: Sequence[KnnResult], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow([r.m, r.p, r.source.label, r.source.k, len(r.per_repeat),
                    f"{r.error_rate:.17g}", f"{r.std_error:.17g}"])
