import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lpsketch import DataVector, beta4, compute_moments, exact_lp, gaussian_quartic_expectation
from lpsketch.moments import HOUSED_PAIRS, aligned_support

from conftest import brute_lp, brute_moment

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestDataVector:
    def test_dense_keeps_only_nonzeros(self):
        v = DataVector.dense([0.0, 2.5, 0.0, -1.0])
        np.testing.assert_array_equal(v.indices, [1, 3])
        np.testing.assert_array_equal(v.values, [2.5, -1.0])
        assert v.dim == 4 and v.nnz == 2

    def test_dense_and_sparse_agree(self):
        d = DataVector.dense([0.0, 3.5, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
        s = DataVector.sparse(10, [1, 6], [3.5, 1.0])
        np.testing.assert_array_equal(d.to_dense(), s.to_dense())

    def test_zeros(self):
        z = DataVector.zeros(7)
        assert z.nnz == 0
        np.testing.assert_array_equal(z.to_dense(), np.zeros(7))

    @pytest.mark.parametrize("idx,vals", [
        ([2, 1], [1.0, 1.0]),
        ([1, 1], [1.0, 1.0]),
        ([0, 5], [1.0, 1.0]),
        ([0], [0.0]),
        ([0], [np.inf]),
        ([0, 1], [1.0]),
    ])
    def test_sparse_rejects_bad_input(self, idx, vals):
        with pytest.raises(ValueError):
            DataVector.sparse(5, idx, vals)

    def test_dense_rejects_nan_and_empty(self):
        with pytest.raises(ValueError):
            DataVector.dense([1.0, np.nan])
        with pytest.raises(ValueError):
            DataVector.dense([])

    def test_take_reads_zeros_off_support(self):
        v = DataVector.sparse(6, [1, 4], [2.0, -3.0])
        np.testing.assert_array_equal(v.take([[0, 1], [4, 5]]), [[0.0, 2.0], [-3.0, 0.0]])

    def test_values_are_read_only(self):
        v = DataVector.dense([1.0, 2.0])
        with pytest.raises(ValueError):
            v.values[0] = 5.0

    def test_aligned_support_is_union(self):
        x = DataVector.sparse(8, [0, 3], [1.0, 2.0])
        y = DataVector.sparse(8, [3, 6], [5.0, 7.0])
        idx, xv, yv = aligned_support(x, y)
        np.testing.assert_array_equal(idx, [0, 3, 6])
        np.testing.assert_array_equal(xv, [1.0, 2.0, 0.0])
        np.testing.assert_array_equal(yv, [0.0, 5.0, 7.0])


class TestMoments:
    def test_against_direct_sums(self, signed_pair):
        x, y = signed_pair
        m = compute_moments(x, y)
        xd, yd = x.to_dense(), y.to_dense()
        for a, b in HOUSED_PAIRS:
            if (a, b) == (0, 0):
                assert m.s(0, 0) == x.dim
                continue
            np.testing.assert_allclose(m.s(a, b), brute_moment(xd, yd, a, b), rtol=1e-12, atol=1e-12)
        for p in (2, 4, 6, 8):
            np.testing.assert_allclose(m.lp(p), brute_lp(xd, yd, p), rtol=1e-12)

    def test_small_pair_by_hand(self):
        m = compute_moments([1.0, 2.0, 0.0], [0.0, 0.0, 0.0])
        assert m.lp(4) == 17.0
        assert m.x(4) == 17.0 and m.y(4) == 0.0
        assert m.nnz_x == 2 and m.nnz_y == 0

    def test_l4_expansion(self, signed_pair):
        m = compute_moments(*signed_pair)
        expanded = m.s(4, 0) + m.s(0, 4) + 6 * m.s(2, 2) - 4 * m.s(3, 1) - 4 * m.s(1, 3)
        np.testing.assert_allclose(expanded, m.lp(4), rtol=1e-10)

    def test_l6_expansion_scalar(self):
        # 1 + 64 - 160 + 240 + 60 - 12 - 192 = 1
        assert exact_lp([1.0], [2.0], 6) == 1.0
        m = compute_moments([1.0], [2.0])
        expanded = (m.s(6, 0) + m.s(0, 6) - 20 * m.s(3, 3) + 15 * m.s(2, 4) + 15 * m.s(4, 2)
                    - 6 * m.s(5, 1) - 6 * m.s(1, 5))
        assert expanded == 1.0

    def test_sparse_and_dense_bit_identical(self, rng):
        xd = rng.standard_normal(40) * (rng.random(40) < 0.3)
        yd = rng.standard_normal(40) * (rng.random(40) < 0.3)
        dense = compute_moments(xd, yd)
        sx = DataVector.sparse(40, np.flatnonzero(xd), xd[xd != 0])
        sy = DataVector.sparse(40, np.flatnonzero(yd), yd[yd != 0])
        sparse = compute_moments(sx, sy)
        assert dense.mixed == sparse.mixed and dense.diff_pow == sparse.diff_pow

    def test_unhoused_pair_and_p(self):
        m = compute_moments([1.0], [1.0])
        with pytest.raises(KeyError):
            m.s(7, 0)
        with pytest.raises(ValueError):
            m.lp(3)
        with pytest.raises(ValueError):
            exact_lp([1.0], [2.0], 5)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            compute_moments([1.0, 2.0], [1.0])

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, 6, elements=finite), arrays(np.float64, 6, elements=finite))
    def test_lp_matches_brute_force(self, x, y):
        for p in (2, 4, 6, 8):
            np.testing.assert_allclose(exact_lp(x, y, p), brute_lp(x, y, p), rtol=1e-10, atol=1e-300)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, 5, elements=finite), st.floats(0.01, 10.0))
    def test_scaling(self, x, alpha):
        y = x[::-1].copy()
        base = compute_moments(x, y)
        scaled = compute_moments(alpha * x, alpha * y)
        np.testing.assert_allclose(scaled.lp(4), alpha ** 4 * base.lp(4), rtol=1e-9, atol=1e-200)
        np.testing.assert_allclose(scaled.s(2, 2), alpha ** 4 * base.s(2, 2), rtol=1e-9, atol=1e-200)


class TestBeta4:
    def test_identical_is_one(self, random_pair):
        x, _ = random_pair
        assert beta4(x, x) == 1.0

    def test_disjoint_nonnegative_is_zero(self):
        assert beta4([1.0, 2.0, 0.0, 0.0], [0.0, 0.0, 3.0, 1.0]) == 0.0

    def test_accepts_table(self, random_pair):
        m = compute_moments(*random_pair)
        assert beta4(m) == beta4(*random_pair)

    def test_zero_pair_rejected(self):
        with pytest.raises(ValueError):
            beta4([0.0, 0.0], [0.0, 0.0])

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, 8, elements=st.floats(0, 100)), arrays(np.float64, 8, elements=st.floats(0, 100)))
    def test_in_unit_interval_for_nonnegative(self, x, y):
        if x.sum() + y.sum() == 0:
            return
        b = beta4(x, y)
        assert -1e-9 <= b <= 1 + 1e-9


class TestGaussianQuartic:
    def test_isserlis_standard_cases(self):
        e = np.eye(3)[0]
        assert gaussian_quartic_expectation(e, e, e, e) == 3.0
        f = np.eye(3)[1]
        assert gaussian_quartic_expectation(e, e, f, f) == 1.0
        assert gaussian_quartic_expectation(e, f, e, f) == 1.0
        assert gaussian_quartic_expectation(e, e, e, f) == 0.0

    def test_monte_carlo(self, rng):
        a, b, c, d = rng.standard_normal((4, 5))
        r = rng.standard_normal((400_000, 5))
        prod = (r @ a) * (r @ b) * (r @ c) * (r @ d)
        se = prod.std() / np.sqrt(prod.size)
        assert abs(prod.mean() - gaussian_quartic_expectation(a, b, c, d)) < 4 * se
