"""Distance estimators and their closed-form variances.

Sketch-based estimators are written once against ``PairStats``, which only
knows how to return inner products between named sketch rows (``"u2"`` is the
projection of ``x**2``, ``"v3"`` the projection of ``y**3``) plus the exact
margins.  The same code therefore runs on a single pair of ``Sketch`` objects,
on one test row against a whole training set, or on a batch of Monte-Carlo
trials.
"""

from dataclasses import dataclass
import math
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from . import _random
from .cubic import solve_margin_cubic_batch
from .moments import DataVector, MomentTable, aligned_support, as_vector, compute_moments, exact_lp
from .projector import Scheme, Sketch

DEFAULT_TAU = 0.9
SAMPLING_STREAM = 0x5A4D

ESTIMATOR_IDS = ("sampling", "crs-var-only", "3p", "3p-m", "1p", "1p-m", "1p-i", "exact", "d6-1p")
SCHEME_OF = {"3p": Scheme.THREE, "3p-m": Scheme.THREE, "1p": Scheme.ONE, "1p-m": Scheme.ONE,
             "1p-i": Scheme.ONE, "d6-1p": Scheme.ONE}
SKETCH_ESTIMATORS = tuple(SCHEME_OF)


@dataclass(frozen=True)
class Estimate:
    estimator: str
    value: float
    variance: Optional[float]
    k: int
    p: int = 4
    branch: Optional[str] = None


class PairStats:
    """Inner products between sketch rows of a pair, plus exact margins.

    ``ip(a, b)`` is ``dot(row_a, row_b)`` with the arguments in that order.
    The estimators below are careful about argument order so that identical
    inputs produce identical floating-point terms.
    """

    def __init__(self, ip: Callable[[str, str], object], k: int,
                 margins_x: Mapping[int, object], margins_y: Mapping[int, object]):
        self.ip = ip
        self.k = k
        self.margins_x = margins_x
        self.margins_y = margins_y

    @classmethod
    def from_sketches(cls, sx: Sketch, sy: Sketch) -> "PairStats":
        if not sx.compatible_with(sy):
            raise ValueError("sketches were built with different projection specs")
        owner = {"u": sx, "v": sy}
        spec = sx.spec
        cache: Dict[Tuple[str, str], float] = {}

        def ip(a: str, b: str) -> float:
            if (a, b) not in cache:
                (sa, pa), (sb, pb) = (a[0], int(a[1:])), (b[0], int(b[1:]))
                if spec.matrix_for(sa, pa) != spec.matrix_for(sb, pb):
                    raise ValueError(f"{a} and {b} come from independent matrices")
                cache[(a, b)] = float(np.dot(owner[sa].row(sa, pa), owner[sb].row(sb, pb)))
            return cache[(a, b)]

        return cls(ip, sx.k, sx.margins, sy.margins)

    def mx(self, q: int):
        return self.margins_x[q]

    def my(self, q: int):
        return self.margins_y[q]


# ------------------------------------------------------------ estimator cores

def _cross4(s: PairStats):
    return (6.0 * s.ip("u2", "v2") - 4.0 * s.ip("u3", "v1") - 4.0 * s.ip("u1", "v3")) / s.k


def core_plain(s: PairStats):
    """Exact margins plus projected cross terms (3p and 1p share this)."""
    return s.mx(4) + s.my(4) + _cross4(s)


def core_margin(s: PairStats):
    k = s.k
    a22 = solve_margin_cubic_batch(s.ip("u2", "v2"), s.ip("u2", "u2"), s.ip("v2", "v2"), s.mx(4), s.my(4), k)
    a31 = solve_margin_cubic_batch(s.ip("u3", "v1"), s.ip("u3", "u3"), s.ip("v1", "v1"), s.mx(6), s.my(2), k)
    a13 = solve_margin_cubic_batch(s.ip("u1", "v3"), s.ip("u1", "u1"), s.ip("v3", "v3"), s.mx(2), s.my(6), k)
    value = s.mx(4) + s.my(4) + 6.0 * a22 - 4.0 * a31 - 4.0 * a13
    # with either vector zero every cross term is exactly zero
    degenerate = (np.asarray(s.mx(2)) == 0) | (np.asarray(s.my(2)) == 0)
    return np.where(degenerate, s.mx(4) + s.my(4), value)


def core_identity(s: PairStats):
    # each bracket pairs a self term with the cross term it cancels when x == y
    uu = s.ip("u2", "v2") - s.ip("u2", "u2")
    vv = s.ip("u2", "v2") - s.ip("v2", "v2")
    ux = s.ip("u3", "u1") - s.ip("u3", "v1")
    vx = s.ip("v1", "v3") - s.ip("u1", "v3")
    return (3.0 * uu + 3.0 * vv + 4.0 * ux + 4.0 * vx) / s.k


def core_d6(s: PairStats):
    cross = (-20.0 * s.ip("u3", "v3") + 15.0 * s.ip("u2", "v4") + 15.0 * s.ip("u4", "v2")
             - 6.0 * s.ip("u5", "v1") - 6.0 * s.ip("u1", "v5")) / s.k
    return s.mx(6) + s.my(6) + cross


CORES = {"3p": core_plain, "1p": core_plain, "3p-m": core_margin, "1p-m": core_margin,
         "1p-i": core_identity, "d6-1p": core_d6}


# ------------------------------------------------------------ variance formulas

def var_sampling(m: MomentTable, k: int) -> float:
    return (m.dim / k) * (m.lp(8) - m.lp(4) ** 2 / m.dim)


def var_crs_predictor(m: MomentTable, k: int) -> float:
    """Variance predictor for conditional random sampling (no estimator here)."""
    return max(m.nnz_x, m.nnz_y) / m.dim * var_sampling(m, k)


def var_3p(m: MomentTable, k: int) -> float:
    s = m.s
    return (36.0 / k * (s(4, 0) * s(0, 4) + s(2, 2) ** 2)
            + 16.0 / k * (s(6, 0) * s(0, 2) + s(3, 1) ** 2)
            + 16.0 / k * (s(2, 0) * s(0, 6) + s(1, 3) ** 2))


def delta_1p(m: MomentTable, k: int) -> float:
    s = m.s
    return (-48.0 / k * (s(5, 0) * s(0, 3) + s(2, 1) * s(3, 2))
            - 48.0 / k * (s(3, 0) * s(0, 5) + s(1, 2) * s(2, 3))
            + 32.0 / k * (s(4, 0) * s(0, 4) + s(1, 1) * s(3, 3)))


def var_1p(m: MomentTable, k: int) -> float:
    return var_3p(m, k) + delta_1p(m, k)


def _margin_term(marg: float, cross: float) -> float:
    den = marg + cross ** 2
    if den <= 0:
        return 0.0
    return (marg - cross ** 2) ** 2 / den


def var_3p_margin_asymptotic(m: MomentTable, k: int) -> float:
    s = m.s
    return (36.0 / k * _margin_term(s(4, 0) * s(0, 4), s(2, 2))
            + 16.0 / k * _margin_term(s(6, 0) * s(0, 2), s(3, 1))
            + 16.0 / k * _margin_term(s(2, 0) * s(0, 6), s(1, 3)))


def delta_identity(m: MomentTable, k: int) -> float:
    s = m.s
    x2, x3, x4, x5, x6 = (s(q, 0) for q in (2, 3, 4, 5, 6))
    y2, y3, y4, y5, y6 = (s(0, q) for q in (2, 3, 4, 5, 6))
    s11, s22, s33 = s(1, 1), s(2, 2), s(3, 3)
    s31, s13 = s(3, 1), s(1, 3)
    s21, s12, s32, s23 = s(2, 1), s(1, 2), s(3, 2), s(2, 3)
    terms = (
        36 * s22 ** 2 + 34 * (x4 ** 2 + y4 ** 2)
        + 32 * s13 * s31 - 32 * x4 * s31
        - 72 * (x4 * s22 + y4 * s22)
        - 32 * (y4 * s31 + x4 * s13 + y4 * s13)
        - 48 * (x3 * x5 + s21 * s23)
        - 48 * (y3 * y5 + s12 * s32)
        + 48 * (x3 * s32 + x5 * s12 + y3 * s23)
        + 48 * (y5 * s21 + x5 * s21 + y3 * s32)
        + 48 * (x3 * s23 + y5 * s12)
        - 32 * (x6 * s11 + y2 * s33)
        - 32 * (x2 * s33 + y6 * s11)
        + 16 * (x2 * x6 + y2 * y6 + 2 * s11 * s33)
    )
    return terms / k


def var_1p_identity(m: MomentTable, k: int) -> float:
    return var_1p(m, k) + delta_identity(m, k)


THEORETICAL_VARIANCE = {
    "sampling": var_sampling,
    "crs-var-only": var_crs_predictor,
    "3p": var_3p,
    "3p-m": var_3p_margin_asymptotic,
    "1p": var_1p,
    "1p-i": var_1p_identity,
    "exact": lambda m, k: 0.0,
}


# ------------------------------------------------------------ sketch estimators

def _check(sx: Sketch, sy: Sketch, estimator: str):
    if not sx.compatible_with(sy):
        raise ValueError("sketches were built with different projection specs")
    want = SCHEME_OF[estimator]
    if sx.spec.scheme is not want:
        raise ValueError(f"estimator {estimator} needs {want.value} sketches, got {sx.spec.scheme.value}")


def _run(estimator: str, sx: Sketch, sy: Sketch, moments: Optional[MomentTable], p: int = 4) -> Estimate:
    _check(sx, sy, estimator)
    value = float(CORES[estimator](PairStats.from_sketches(sx, sy)))
    var = None
    if moments is not None and estimator in THEORETICAL_VARIANCE:
        var = THEORETICAL_VARIANCE[estimator](moments, sx.k)
    return Estimate(estimator, value, var, sx.k, p)


def est_3p(sx: Sketch, sy: Sketch, moments: Optional[MomentTable] = None) -> Estimate:
    return _run("3p", sx, sy, moments)


def est_1p(sx: Sketch, sy: Sketch, moments: Optional[MomentTable] = None) -> Estimate:
    return _run("1p", sx, sy, moments)


def est_3p_margin(sx: Sketch, sy: Sketch, moments: Optional[MomentTable] = None) -> Estimate:
    """Margin-assisted estimate; its variance is only known asymptotically."""
    return _run("3p-m", sx, sy, moments)


def est_1p_margin(sx: Sketch, sy: Sketch, moments: Optional[MomentTable] = None) -> Estimate:
    return _run("1p-m", sx, sy, moments)


def est_1p_identity(sx: Sketch, sy: Sketch, moments: Optional[MomentTable] = None) -> Estimate:
    """Projects the margins too, so the estimate is exactly 0 when ``x == y``."""
    return _run("1p-i", sx, sy, moments)


def est_d6_1p(sx: Sketch, sy: Sketch, moments: Optional[MomentTable] = None) -> Estimate:
    if sx.max_power < 5 or sy.max_power < 5:
        raise ValueError("the l6 estimator needs sketches with powers up to 5")
    return _run("d6-1p", sx, sy, None, p=6)


def est_exact(x, y, p: int = 4) -> Estimate:
    return Estimate("exact", exact_lp(x, y, p), 0.0, 0, p)


def select_estimator(sx: Sketch, sy: Sketch, tau: float = DEFAULT_TAU,
                     moments: Optional[MomentTable] = None) -> Estimate:
    """Experimental switch between the plain and identity-friendly estimators.

    A plug-in l4 similarity is formed from the plain estimate; pairs that look
    more similar than ``tau`` get the identity-friendly estimate.
    """
    plain = est_1p(sx, sy, moments)
    denom = sx.margin(4) + sy.margin(4)
    if denom <= 0:
        raise ValueError("both vectors are zero")
    similarity = min(1.0, max(0.0, 1.0 - plain.value / denom))
    if similarity > tau:
        chosen = est_1p_identity(sx, sy, moments)
    else:
        chosen = plain
    return Estimate(chosen.estimator, chosen.value, chosen.variance, chosen.k, 4, branch=chosen.estimator)


# ------------------------------------------------------------ sampling

def sampling_indices(seed: int, dim: int, k: int) -> np.ndarray:
    """Coordinates drawn uniformly with replacement, keyed by ``seed``."""
    key = np.uint64(_random.derive_key(seed, SAMPLING_STREAM))
    u = _random.uniforms(key, np.arange(k, dtype=np.uint64))
    return np.minimum((u * dim).astype(np.int64), dim - 1)


def sampling_value(x: DataVector, y: DataVector, idx: np.ndarray) -> np.ndarray:
    """Estimate(s) from sampled coordinates; ``idx`` has shape (..., k)."""
    k = idx.shape[-1]
    diff4 = np.abs(x.take(idx) - y.take(idx)) ** 4
    return x.dim / k * diff4.sum(axis=-1)


def est_sampling(x, y, k: int, seed: int) -> Estimate:
    x, y = as_vector(x), as_vector(y)
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} != {y.dim}")
    if k < 1:
        raise ValueError("k must be positive")
    idx = sampling_indices(seed, x.dim, k)
    value = float(sampling_value(x, y, idx))
    return Estimate("sampling", value, var_sampling(compute_moments(x, y), k), k)


# ------------------------------------------------------------ conditions & bounds

def one_matrix_condition(x, y) -> Tuple[bool, float]:
    """Sufficient condition for one matrix to beat three on nonnegative data.

    With ``z = sqrt(x*y)``, returns ``(lhs >= 0, lhs)`` where
    ``lhs = 5 sum z^3 sum z^5 - sum z^2 sum z^6``.
    """
    x, y = as_vector(x), as_vector(y)
    if np.any(x.values < 0) or np.any(y.values < 0):
        raise ValueError("the condition is only defined for nonnegative data")
    _, xv, yv = aligned_support(x, y)
    z = np.sqrt(xv * yv)
    p = {q: math.fsum(z ** q) for q in (2, 3, 5, 6)}
    lhs = 5.0 * p[3] * p[5] - p[2] * p[6]
    return lhs >= 0, lhs


def _abs_values(z) -> np.ndarray:
    """Magnitudes scaled to max 1 (both ratios are scale free) and the dimension."""
    if isinstance(z, DataVector):
        arr, dim = np.abs(z.values), z.dim
    else:
        arr = np.abs(np.asarray(z, dtype=np.float64).ravel())
        dim = arr.size
    peak = arr.max() if arr.size else 0.0
    return (arr / peak if peak > 0 else arr), dim


def complexity_ratio(z, p: int = 4) -> float:
    """Sample-complexity ratio ``sum z^2 sum z^(2p-2) / (sum z^p)^2``."""
    if p < 4 or p % 2:
        raise ValueError("p must be an even integer >= 4")
    vals, _ = _abs_values(z)
    top = math.fsum(vals ** p)
    if top == 0:
        raise ValueError("complexity ratio of a zero vector")
    return math.fsum(vals ** 2) * math.fsum(vals ** (2 * p - 2)) / top ** 2


def holder_chain(z, p: int = 4) -> Tuple[float, float, float]:
    """The ratio, the intermediate Hölder bound, and the final ``D^(1-2/p)``.

    The first inequality is tight for constant vectors, the second for
    vectors with a single nonzero.
    """
    ratio = complexity_ratio(z, p)
    vals, dim = _abs_values(z)
    top = math.fsum(vals ** p)
    bound = dim ** (1.0 - 2.0 / p)
    middle = math.fsum(vals ** (2 * p - 2)) / top ** (2.0 - 2.0 / p) * bound
    return ratio, middle, bound
