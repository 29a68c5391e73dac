"""Quick built-in property checks, run by ``lpsketch verify``.

Each check is small enough to finish in a few seconds.  The full-size
statistical checks live in the test suite.
"""

import io
import itertools
import math
from typing import List, NamedTuple

import numpy as np

from .cubic import solve_margin_cubic_batch
from .estimators import (
    THEORETICAL_VARIANCE,
    complexity_ratio,
    delta_1p,
    est_1p_identity,
    holder_chain,
    one_matrix_condition,
    sampling_value,
    var_1p,
    var_3p,
    var_1p_identity,
    var_3p_margin_asymptotic,
    var_sampling,
)
from .knn import LabeledDataset, knn_classify
from .moments import DataVector, compute_moments, exact_lp
from .projector import ProjectionSpec, Scheme, read_sketches, sketch_many, write_sketches
from .simlab import estimator_trials, generate_pair, trial_seeds


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _hand_values() -> str:
    m = compute_moments([1.0, 0.0], [0.0, 1.0])
    got = (var_3p(m, 1), delta_1p(m, 1), var_1p(m, 1), var_3p_margin_asymptotic(m, 1))
    assert np.allclose(got, (68.0, -64.0, 4.0, 68.0), rtol=0, atol=1e-12), got
    return "68, -64, 4, 68"


def _identity_vanishes() -> str:
    rng = np.random.default_rng(11)
    for trial in range(10):
        x = DataVector.dense(rng.standard_normal(40))
        sx, sy = sketch_many([x, x], ProjectionSpec(trial, 16, 40))
        assert est_1p_identity(sx, sy).value == 0.0
    return "10 vectors"


def _identity_variance() -> str:
    rng = np.random.default_rng(12)
    x = rng.gamma(2.0, 1.0, 30)
    m = compute_moments(x, x)
    rel = abs(var_1p_identity(m, 1)) / var_1p(m, 1)
    assert rel < 1e-10, rel
    return f"relative residual {rel:.1e}"


def _sampling_enumeration() -> str:
    x = DataVector.dense([0.5, -1.0, 2.0, 0.0])
    y = DataVector.dense([1.0, 0.25, -0.5, 3.0])
    k = 3
    idx = np.array(list(itertools.product(range(4), repeat=k)))
    values = sampling_value(x, y, idx)
    exact_var = float(np.mean(values ** 2) - np.mean(values) ** 2)
    predicted = var_sampling(compute_moments(x, y), k)
    assert abs(exact_var - predicted) <= 1e-12 * max(1.0, predicted), (exact_var, predicted)
    return f"{len(idx)} tuples"


def _cubic_factorization() -> str:
    rng = np.random.default_rng(13)
    m1, m2 = rng.uniform(0.1, 5.0, 200), rng.uniform(0.1, 5.0, 200)
    a = rng.uniform(-1, 1, 200) * np.sqrt(m1 * m2)
    k = 7
    got = solve_margin_cubic_batch(a * k, m1 * k, m2 * k, m1, m2, k)
    err = float(np.max(np.abs(got - a)))
    assert err < 1e-10, err
    return f"max error {err:.1e}"


def _condition_counterexample() -> str:
    z = np.concatenate([[10.0], np.ones(1000)])
    holds, lhs = one_matrix_condition(z ** 2, np.ones_like(z))
    assert not holds and lhs < 0
    return f"lhs {lhs:.6g}"


def _holder() -> str:
    rng = np.random.default_rng(14)
    for p in (4, 6, 8):
        for _ in range(50):
            z = rng.pareto(1.5, 60)
            assert complexity_ratio(z, p) <= 60 ** (1 - 2 / p) * (1 + 1e-12)
    ratio, middle, _ = holder_chain(np.full(25, 3.0), 4)
    assert abs(ratio - middle) <= 1e-12 * middle
    _, middle, bound = holder_chain(np.eye(1, 25)[0], 4)
    assert abs(middle - bound) <= 1e-12 * bound
    return "p in 4, 6, 8"


def _sketch_round_trip() -> str:
    rng = np.random.default_rng(15)
    rows = [DataVector.dense(rng.standard_normal(20)) for _ in range(3)]
    for scheme in Scheme:
        sk = sketch_many(rows, ProjectionSpec(5, 8, 20, scheme), 3, ["a", "b", "c"])
        buf = io.StringIO()
        write_sketches(sk, buf)
        back = read_sketches(io.StringIO(buf.getvalue()))
        for s, t in zip(sk, back):
            assert s.rows.keys() == t.rows.keys()
            for key in s.rows:
                assert np.array_equal(s.rows[key], t.rows[key])
    return "1p and 3p"


def _unbiased_and_variance() -> str:
    x, y = generate_pair("gamma", {"shape": 2.0, "correlation": 0.5}, 60, 3)
    m = compute_moments(x, y)
    d = m.lp(4)
    seeds = trial_seeds(99, 20_000)
    parts = []
    for e in ("3p", "1p", "1p-i"):
        v = estimator_trials(e, x, y, 32, seeds)
        z = (v.mean() - d) / (v.std(ddof=1) / math.sqrt(v.size))
        ratio = v.var(ddof=1) / THEORETICAL_VARIANCE[e](m, 32)
        assert abs(z) < 4.5, (e, z)
        assert abs(ratio - 1) < 0.1, (e, ratio)
        parts.append(f"{e} z={z:+.2f} var ratio={ratio:.3f}")
    return "; ".join(parts)


def _d6_identity() -> str:
    assert exact_lp([1.0], [2.0], 6) == 1.0
    return "x=1, y=2"


def _knn_oracle() -> str:
    rng = np.random.default_rng(16)
    pts = np.vstack([rng.normal(0, 1, (30, 5)), rng.normal(1, 1, (30, 5))])
    labels = np.repeat([0, 1], 30)
    order = rng.permutation(60)
    pts, labels = pts[order], labels[order]
    ds = LabeledDataset([DataVector.dense(r) for r in pts], labels, np.arange(40), np.arange(40, 60))
    res = knn_classify(ds, 3, 4)
    wrong = 0
    for t in range(40, 60):
        d = [np.sum((pts[t] - pts[i]) ** 4) for i in range(40)]
        nn = sorted(range(40), key=lambda i: (d[i], labels[i]))[:3]
        pred = int(round(np.mean(labels[nn])))
        wrong += pred != labels[t]
    assert res.error_rate == wrong / 20, (res.error_rate, wrong)
    return f"error {res.error_rate:.3f}"


CHECKS: List[tuple] = [
    ("closed-form hand values", _hand_values),
    ("identity estimator vanishes on x == y", _identity_vanishes),
    ("identity variance vanishes on x == y", _identity_variance),
    ("sampling variance by enumeration", _sampling_enumeration),
    ("margin cubic recovers exact inner product", _cubic_factorization),
    ("condition counterexample fails", _condition_counterexample),
    ("moment ratio bound", _holder),
    ("sketch file round trip", _sketch_round_trip),
    ("unbiasedness and variance (small)", _unbiased_and_variance),
    ("l6 expansion", _d6_identity),
    ("exact k-NN matches brute force", _knn_oracle),
]


def run_checks(checks=None) -> List[CheckResult]:
    out = []
    for name, fn in checks or CHECKS:
        try:
            out.append(CheckResult(name, True, fn()))
        except AssertionError as exc:
            out.append(CheckResult(name, False, f"assertion failed: {exc}"))
    return out
