"""Margin-constrained inner product estimate from a cubic equation.

Given sketch statistics ``t = u.v``, ``su = |u|^2``, ``sv = |v|^2`` and the exact
marginal moments ``m1``, ``m2`` of the two projected vectors, the maximum
likelihood estimate of their inner product ``a`` solves

    a^3 - (t/k) a^2 + ((m1*sv + m2*su)/k - m1*m2) a - m1*m2*t/k = 0.

With ``c = sqrt(m1*m2)`` and ``a = c*alpha`` this becomes scale free:

    alpha^3 - tau alpha^2 + (sigma - 1) alpha - tau = 0,
    tau = t / (k c),  sigma = (m1*sv + m2*su) / (k c^2),

and Cauchy-Schwarz confines the answer to ``alpha`` in [-1, 1].  The cubic
always has a root there: its value is >= 0 at +1 and <= 0 at -1 whenever the
sketch statistics themselves satisfy Cauchy-Schwarz.
"""

from dataclasses import dataclass

import numpy as np

DISCRIMINANT_RTOL = 1e-12
FEASIBILITY_TOL = 1e-12
_NEWTON_STEPS = 3


@dataclass(frozen=True)
class CubicInputs:
    t: float
    su: float
    sv: float
    m1: float
    m2: float
    k: int

    def __post_init__(self):
        if self.su < 0 or self.sv < 0 or self.m1 < 0 or self.m2 < 0:
            raise ValueError("squared norms and marginal moments must be nonnegative")
        if self.k < 1:
            raise ValueError("k must be positive")


def _real_roots(b, c, d):
    """Real roots of the monic cubic ``z^3 + b z^2 + c z + d`` (row-wise).

    Returns an ``(n, 3)`` array; slots for complex roots hold NaN.
    """
    b, c, d = (np.asarray(v, dtype=np.float64) for v in (b, c, d))
    n = b.shape[0]
    shift = b / 3.0
    p = c - b * shift
    q = 2.0 * shift ** 3 - shift * c + d
    half_q = q / 2.0
    third_p = p / 3.0
    disc = half_q ** 2 + third_p ** 3
    scale = half_q ** 2 + np.abs(third_p) ** 3
    three = disc <= DISCRIMINANT_RTOL * scale

    roots = np.full((n, 3), np.nan)

    # three real roots (or a repeated one), trigonometric form
    m = np.where(three & (p < 0), np.sqrt(np.maximum(-third_p, 0.0)), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(m > 0, -half_q / np.where(m > 0, m ** 3, 1.0), 0.0)
    theta = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
    for j in range(3):
        roots[:, j] = np.where(three, 2.0 * m * np.cos(theta - 2.0 * np.pi * j / 3.0), np.nan)

    # one real root, Cardano with the cancellation-free branch
    one = ~three
    sq = np.sqrt(np.where(one, disc, 0.0))
    big = -np.sign(half_q) * np.cbrt(np.abs(half_q) + sq)
    big = np.where(half_q == 0, np.cbrt(sq), big)
    with np.errstate(divide="ignore", invalid="ignore"):
        single = np.where(big != 0, big - third_p / np.where(big != 0, big, 1.0), 0.0)
    roots[:, 0] = np.where(one, single, roots[:, 0])

    roots = roots - shift[:, None]

    # polish against the undepressed polynomial
    bb, cc, dd = b[:, None], c[:, None], d[:, None]
    for _ in range(_NEWTON_STEPS):
        f = ((roots + bb) * roots + cc) * roots + dd
        df = (3.0 * roots + 2.0 * bb) * roots + cc
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(np.isfinite(roots) & (df != 0), f / df, 0.0)
        roots = roots - step
    return roots


def _select(roots, plug_in):
    """Feasible root closest to the plug-in estimate, clamped to [-1, 1]."""
    finite = np.isfinite(roots)
    feasible = finite & (np.abs(roots) <= 1.0 + FEASIBILITY_TOL)
    dist = np.abs(roots - plug_in[:, None])
    pool = np.where(feasible.any(axis=1)[:, None], feasible, finite)
    dist = np.where(pool, dist, np.inf)
    pick = np.argmin(dist, axis=1)
    chosen = roots[np.arange(roots.shape[0]), pick]
    return np.clip(chosen, -1.0, 1.0)


def solve_margin_cubic_batch(t, su, sv, m1, m2, k) -> np.ndarray:
    """Vectorized margin-cubic solve; every argument broadcasts."""
    t, su, sv, m1, m2 = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (t, su, sv, m1, m2)))
    shape = t.shape
    t, su, sv, m1, m2 = (v.ravel() for v in (t, su, sv, m1, m2))
    c = np.sqrt(m1) * np.sqrt(m2)
    ok = c > 0
    safe_c = np.where(ok, c, 1.0)
    tau = t / (k * safe_c)
    sigma = (m1 * sv + m2 * su) / (k * safe_c * safe_c)
    roots = _real_roots(-tau, sigma - 1.0, -tau)
    alpha = _select(roots, tau)
    return np.where(ok, c * alpha, 0.0).reshape(shape)


def solve_margin_cubic(c: CubicInputs) -> float:
    """Selected real root of the margin cubic.

    The feasible real root nearest the plug-in ``t/k`` is returned; if rounding
    pushes every root outside ``[-sqrt(m1 m2), sqrt(m1 m2)]`` the nearest one is
    clamped.  Returns 0 when either marginal moment is 0.
    """
    return float(solve_margin_cubic_batch(c.t, c.su, c.sv, c.m1, c.m2, c.k))
