"""Independent oracles shared by the test modules.

None of these reuse library formulas.  Variances come from the quadratic-form
identity for Gaussian vectors, cubic roots from bracketing and bisection, and
k-NN from a plain double loop.
"""

import contextlib
import itertools

import numpy as np
import pytest

from lpsketch import DataVector


def brute_lp(x, y, p):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(sum(abs(a - b) ** p for a, b in zip(x, y)))


def brute_moment(x, y, a, b):
    return float(sum(xi ** a * yi ** b for xi, yi in zip(np.asarray(x, float), np.asarray(y, float))))


# ------------------------------------------------------------ variance oracle
#
# A sketch estimator's cross part is (1/k) sum_j Q(r_j) where each column
# r_j ~ N(0, I) (one block per independent matrix) and Q(r) = r^T A r.  For
# Gaussian r, Var(r^T A r) = 2 tr(A_s^2) with A_s the symmetric part, so the
# estimator variance is (2/k) sum over blocks of tr(A_s^2).

def _sym(a):
    return 0.5 * (a + a.T)


def quadratic_form_variance(terms, k):
    """``terms`` is a list of blocks; each block is a list of (coef, a, b)
    meaning ``coef * (a.r)(b.r)`` for that block's matrix column ``r``."""
    total = 0.0
    for block in terms:
        dim = len(block[0][1])
        A = np.zeros((dim, dim))
        for coef, a, b in block:
            A += coef * np.outer(a, b)
        As = _sym(A)
        total += 2.0 * np.trace(As @ As)
    return total / k


def oracle_var(name, x, y, k):
    x, y = np.asarray(x, float), np.asarray(y, float)
    p = {r: (x ** r, y ** r) for r in range(1, 6)}
    u = {r: p[r][0] for r in p}
    v = {r: p[r][1] for r in p}
    if name == "3p":
        blocks = [[(6, u[2], v[2])], [(-4, u[3], v[1])], [(-4, u[1], v[3])]]
    elif name == "1p":
        blocks = [[(6, u[2], v[2]), (-4, u[3], v[1]), (-4, u[1], v[3])]]
    elif name == "1p-i":
        blocks = [[(6, u[2], v[2]), (-4, u[3], v[1]), (-4, u[1], v[3]),
                   (-3, u[2], u[2]), (-3, v[2], v[2]), (4, u[1], u[3]), (4, v[1], v[3])]]
    elif name == "d6-1p":
        blocks = [[(-20, u[3], v[3]), (15, u[2], v[4]), (15, u[4], v[2]), (-6, u[5], v[1]), (-6, u[1], v[5])]]
    else:
        raise KeyError(name)
    return quadratic_form_variance(blocks, k)


def sampling_enumeration(x, y, k):
    """Exact mean and variance of the with-replacement sampling estimator."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    dim = x.size
    vals = []
    for tup in itertools.product(range(dim), repeat=k):
        vals.append(dim / k * sum(abs(x[i] - y[i]) ** 4 for i in tup))
    vals = np.array(vals)
    return float(vals.mean()), float(((vals - vals.mean()) ** 2).mean())


# ------------------------------------------------------------ cubic oracle

def cubic_roots_bisection(t, su, sv, m1, m2, k, grid=4001):
    """All real roots in [-2c, 2c] of the margin cubic, by sign changes on a
    grid followed by bisection."""
    c = np.sqrt(m1 * m2)

    def f(a):
        return a ** 3 - a ** 2 * t / k - m1 * m2 * t / k - a * m1 * m2 + a * (m1 * sv + m2 * su) / k

    xs = np.linspace(-2 * c, 2 * c, grid)
    fs = f(xs)
    roots = []
    for i in range(grid - 1):
        lo, hi = xs[i], xs[i + 1]
        flo, fhi = fs[i], fs[i + 1]
        if flo == 0:
            roots.append(lo)
            continue
        if flo * fhi > 0:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if fm == 0 or hi - lo < 1e-15 * max(1.0, c):
                break
            if (fm < 0) == (flo < 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return np.array(roots), c


def select_root_oracle(t, su, sv, m1, m2, k):
    roots, c = cubic_roots_bisection(t, su, sv, m1, m2, k)
    feasible = roots[np.abs(roots) <= c * (1 + 1e-9)]
    plug = t / k
    pool = feasible if feasible.size else roots
    best = pool[np.argmin(np.abs(pool - plug))]
    return float(np.clip(best, -c, c))


# ------------------------------------------------------------ k-NN oracle

def brute_knn_error(points, labels, train, test, m, p):
    points = np.asarray(points, float)
    wrong = 0
    for t in test:
        dists = []
        for i in train:
            d = float(np.sum(np.abs(points[t] - points[i]) ** p))
            dists.append((d, labels[i]))
        dists.sort()
        nn = dists[:m]
        counts, sums = {}, {}
        for d, lab in nn:
            counts[lab] = counts.get(lab, 0) + 1
            sums[lab] = sums.get(lab, 0.0) + d
        best = max(counts.values())
        tied = [lab for lab in counts if counts[lab] == best]
        pred = min(tied, key=lambda lab: (sums[lab], lab))
        wrong += pred != labels[t]
    return wrong / len(test)


# ------------------------------------------------------------ fixtures

@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def random_pair(rng):
    x = rng.gamma(2.0, 1.0, 30)
    y = 0.5 * x + rng.gamma(2.0, 1.0, 30) * 0.5
    return DataVector.dense(x), DataVector.dense(y)


@pytest.fixture
def signed_pair(rng):
    x = rng.standard_normal(25)
    y = rng.standard_normal(25)
    x[rng.random(25) < 0.3] = 0.0
    return DataVector.dense(x), DataVector.dense(y)


# ------------------------------------------------------------ acceptance report

ACCEPTANCE_RESULTS = {}


@contextlib.contextmanager
def criterion(number, title):
    """Record the outcome of one acceptance criterion for the summary.

    The body may append measured figures to the yielded list.
    """
    detail = []
    try:
        yield detail
    except BaseException:
        ACCEPTANCE_RESULTS[number] = (False, title, "; ".join(detail))
        raise
    ACCEPTANCE_RESULTS[number] = (True, title, "; ".join(detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, title, detail = ACCEPTANCE_RESULTS[number]
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
