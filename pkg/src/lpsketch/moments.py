"""Exact moments of a vector pair.

Everything the estimators and their variance formulas need is a power sum of
the form ``S(a, b) = sum_i x_i**a * y_i**b`` or ``sum_i |x_i - y_i|**p``.  These
are computed exactly (up to correctly rounded summation) in one pass over the
union of the two supports and serve as ground truth for every test.
"""

from dataclasses import dataclass, field
import math
from typing import Mapping

import numpy as np

SUPPORTED_P = (2, 4, 6, 8)
MAX_ORDER = 6
MAX_TOTAL_ORDER = 8


def _housed_pairs():
    return [
        (a, b)
        for a in range(MAX_ORDER + 1)
        for b in range(MAX_ORDER + 1)
        if a + b <= MAX_TOTAL_ORDER
    ]


HOUSED_PAIRS = tuple(_housed_pairs())


@dataclass(frozen=True, eq=False)
class DataVector:
    """A real vector of length ``dim``, stored as its sorted nonzero entries.

    Dense and sparse inputs end up in the same canonical form, which is what
    makes moments computed from either representation bit-identical.
    """

    dim: int
    indices: np.ndarray
    values: np.ndarray
    is_sparse: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        self.indices.setflags(write=False)
        self.values.setflags(write=False)

    @classmethod
    def dense(cls, values) -> "DataVector":
        arr = np.asarray(values, dtype=np.float64).ravel()
        if arr.size == 0:
            raise ValueError("a dense vector needs at least one entry")
        if not np.all(np.isfinite(arr)):
            raise ValueError("vector entries must be finite")
        nz = np.flatnonzero(arr)
        return cls(arr.size, nz.astype(np.int64), arr[nz].copy(), False)

    @classmethod
    def sparse(cls, dim: int, indices, values) -> "DataVector":
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = np.asarray(values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same length")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("sparse indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= dim:
                raise ValueError(f"sparse index out of range for dim={dim}")
            if np.any(val == 0.0):
                raise ValueError("sparse values must be nonzero")
            if not np.all(np.isfinite(val)):
                raise ValueError("vector entries must be finite")
        return cls(int(dim), idx.copy(), val.copy(), True)

    @classmethod
    def zeros(cls, dim: int) -> "DataVector":
        return cls.sparse(dim, [], [])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def take(self, positions) -> np.ndarray:
        """Entries at arbitrary (possibly repeated) positions."""
        positions = np.asarray(positions, dtype=np.int64)
        if self.nnz == 0:
            return np.zeros(positions.shape)
        loc = np.searchsorted(self.indices, positions)
        loc_c = np.minimum(loc, self.nnz - 1)
        hit = self.indices[loc_c] == positions
        return np.where(hit, self.values[loc_c], 0.0)

    def scaled(self, alpha: float) -> "DataVector":
        if alpha == 0:
            return DataVector.zeros(self.dim)
        return DataVector(self.dim, self.indices.copy(), self.values * alpha, self.is_sparse)

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"DataVector(dim={self.dim}, nnz={self.nnz}, {kind})"


def as_vector(v) -> DataVector:
    if isinstance(v, DataVector):
        return v
    return DataVector.dense(v)


def aligned_support(x: DataVector, y: DataVector):
    """Union of supports (ascending) with both vectors' values on it."""
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} != {y.dim}")
    idx = np.union1d(x.indices, y.indices)
    xv = np.zeros(idx.size)
    yv = np.zeros(idx.size)
    xv[np.searchsorted(idx, x.indices)] = x.values
    yv[np.searchsorted(idx, y.indices)] = y.values
    return idx, xv, yv


@dataclass(frozen=True)
class MomentTable:
    dim: int
    mixed: Mapping[tuple, float]
    diff_pow: Mapping[int, float]
    nnz_x: int
    nnz_y: int

    def s(self, a: int, b: int) -> float:
        try:
            return self.mixed[(a, b)]
        except KeyError:
            raise KeyError(f"S({a},{b}) is not housed in the moment table") from None

    def x(self, q: int) -> float:
        """Marginal power sum of x."""
        return self.s(q, 0)

    def y(self, q: int) -> float:
        return self.s(0, q)

    def lp(self, p: int) -> float:
        try:
            return self.diff_pow[p]
        except KeyError:
            raise ValueError(f"unsupported p={p}; expected one of {SUPPORTED_P}") from None


def compute_moments(x, y) -> MomentTable:
    x, y = as_vector(x), as_vector(y)
    _, xv, yv = aligned_support(x, y)
    xp = [np.ones_like(xv)] + [xv ** a for a in range(1, MAX_ORDER + 1)]
    yp = [np.ones_like(yv)] + [yv ** b for b in range(1, MAX_ORDER + 1)]
    mixed = {}
    for a, b in HOUSED_PAIRS:
        if a == 0 and b == 0:
            mixed[(0, 0)] = float(x.dim)
        else:
            mixed[(a, b)] = math.fsum(xp[a] * yp[b])
    diff = np.abs(xv - yv)
    diff_pow = {p: math.fsum(diff ** p) for p in SUPPORTED_P}
    return MomentTable(x.dim, mixed, diff_pow, x.nnz, y.nnz)


def exact_lp(x, y, p: int = 4) -> float:
    """``sum_i |x_i - y_i|**p`` with no root taken."""
    if p not in SUPPORTED_P:
        raise ValueError(f"unsupported p={p}; expected one of {SUPPORTED_P}")
    x, y = as_vector(x), as_vector(y)
    _, xv, yv = aligned_support(x, y)
    return math.fsum(np.abs(xv - yv) ** p)


def beta4(x, y=None) -> float:
    """l4 similarity: 1 for identical vectors, 0 for disjoint nonnegative ones."""
    m = x if isinstance(x, MomentTable) else compute_moments(x, y)
    denom = m.x(4) + m.y(4)
    if denom <= 0:
        raise ValueError("beta4 is undefined when both vectors are zero")
    return 1.0 - m.lp(4) / denom


def _dense(v) -> np.ndarray:
    if isinstance(v, DataVector):
        return v.to_dense()
    return np.asarray(v, dtype=np.float64).ravel()


def gaussian_quartic_expectation(a, b, c, d) -> float:
    """Closed form of E[(a.r)(b.r)(c.r)(d.r)] for r with i.i.d. N(0, 1) entries."""
    a, b, c, d = (_dense(v) for v in (a, b, c, d))
    if not (a.shape == b.shape == c.shape == d.shape):
        raise ValueError("dimension mismatch")
    ab, cd = math.fsum(a * b), math.fsum(c * d)
    ac, bd = math.fsum(a * c), math.fsum(b * d)
    ad, bc = math.fsum(a * d), math.fsum(b * c)
    return ab * cd + ac * bd + ad * bc
