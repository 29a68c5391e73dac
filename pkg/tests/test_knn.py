import io

import numpy as np
import pytest

from lpsketch import DataVector, DistanceSource, LabeledDataset, knn_classify, knn_repeat, p_sweep
from lpsketch.knn import distance_rows, predict, vocabulary_dataset, vote, write_knn_csv
from lpsketch.simlab import trial_seeds

from conftest import brute_knn_error


def _blobs(seed, n_train=200, n_test=200, dim=50, shift=0.5):
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    labels = rng.integers(0, 2, n)
    pts = rng.standard_normal((n, dim)) + shift * labels[:, None]
    ds = LabeledDataset([DataVector.dense(p) for p in pts], labels, np.arange(n_train), np.arange(n_train, n))
    return ds, pts, labels


class TestDataset:
    def test_overlap_rejected(self):
        rows = [DataVector.dense([1.0])] * 3
        with pytest.raises(ValueError):
            LabeledDataset(rows, [0, 1, 0], [0, 1], [1, 2])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            LabeledDataset([DataVector.dense([1.0])], [0, 1], [0], [])

    def test_from_split(self):
        a, b = DataVector.dense([1.0]), DataVector.dense([2.0])
        ds = LabeledDataset.from_split([a], [3], [b], [4])
        assert list(ds.train) == [0] and list(ds.test) == [1]


class TestVote:
    def test_majority(self):
        assert vote(np.array([1.0, 2.0, 3.0]), np.array([5, 7, 7]), 3) == 7

    def test_tie_goes_to_smaller_summed_distance(self):
        d = np.array([1.0, 2.0, 2.5, 0.2])
        labels = np.array([0, 0, 1, 1])
        assert vote(d, labels, 4) == 1

    def test_full_tie_goes_to_lowest_class(self):
        assert vote(np.array([1.0, 1.0]), np.array([4, 2]), 2) == 2

    def test_equal_distances_ordered_by_label(self):
        assert vote(np.array([1.0, 1.0, 5.0]), np.array([9, 3, 9]), 1) == 3


class TestExact:
    @pytest.mark.parametrize("m,p", [(1, 4), (5, 4), (5, 2), (7, 6)])
    def test_matches_brute_force(self, m, p):
        ds, pts, labels = _blobs(1, 60, 40, 8)
        res = knn_classify(ds, m, p)
        assert res.error_rate == brute_knn_error(pts, labels, ds.train, ds.test, m, p)

    def test_blobs_spec_example(self):
        ds, pts, labels = _blobs(2)
        res = knn_classify(ds, 5, 4)
        assert res.error_rate == brute_knn_error(pts, labels, ds.train, ds.test, 5, 4)

    def test_identical_point_recovered(self):
        rows = [DataVector.dense(v) for v in ([0.0, 0.0], [5.0, 5.0], [5.0, 5.0])]
        ds = LabeledDataset(rows, [1, 2, 2], [0, 1], [2])
        assert predict(ds, 1)[0] == 2

    def test_single_class(self):
        ds, _, _ = _blobs(3, 40, 20, 5)
        ds.labels[:] = 1
        for r in p_sweep(ds, [1, 3], [2, 4, 6, 8]):
            assert r.error_rate == 0.0

    def test_training_order_invariance(self):
        ds, _, _ = _blobs(4, 60, 40, 6)
        perm = np.random.default_rng(0).permutation(ds.train)
        shuffled = LabeledDataset(ds.rows, ds.labels, perm, ds.test)
        for m in (1, 4, 9):
            np.testing.assert_array_equal(predict(ds, m), predict(shuffled, m))

    def test_scaling_invariance(self):
        ds, _, _ = _blobs(5, 60, 40, 6)
        scaled = LabeledDataset([r.scaled(3.0) for r in ds.rows], ds.labels, ds.train, ds.test)
        np.testing.assert_array_equal(predict(ds, 5), predict(scaled, 5))

    def test_heavy_tailed_coordinate_favours_p4(self):
        # classes differ only in coordinate 0, which carries a large offset;
        # the other coordinates hold moderate noise that dominates at p = 2
        rng = np.random.default_rng(6)
        n = 300
        labels = np.arange(n) % 2
        pts = rng.uniform(-1, 1, (n, 300))
        pts[:, 0] = np.where(labels == 1, 3.0, 0.0) + rng.normal(0, 0.1, n)
        ds = LabeledDataset([DataVector.dense(p) for p in pts], labels, np.arange(200), np.arange(200, n))
        res = {r.p: r.error_rate for r in p_sweep(ds, [1], [2, 4])}
        assert res[4] < res[2]
        assert res[4] == brute_knn_error(pts, labels, ds.train, ds.test, 1, 4)

    def test_errors(self):
        ds, _, _ = _blobs(7, 10, 5, 3)
        with pytest.raises(ValueError):
            knn_classify(ds, 11, 4)
        with pytest.raises(ValueError):
            knn_classify(ds, 0, 4)
        with pytest.raises(ValueError):
            p_sweep(ds, [1], [3])
        empty = LabeledDataset(ds.rows, ds.labels, [], ds.test)
        with pytest.raises(ValueError):
            knn_classify(empty, 1, 4)


class TestEstimated:
    def test_distance_rows_match_pairwise_estimator(self):
        from lpsketch import ProjectionSpec, Scheme, est_1p, est_3p_margin, sketch_many

        ds, _, _ = _blobs(8, 15, 5, 10)
        for estimator, scheme, fn in [("1p", Scheme.ONE, est_1p), ("3p-m", Scheme.THREE, est_3p_margin)]:
            src = DistanceSource(estimator, 32, 5)
            rows = list(distance_rows(ds, 4, src))
            sk = sketch_many(ds.rows, ProjectionSpec(5, 32, ds.dim, scheme))
            for ti, t in enumerate(ds.test):
                want = [fn(sk[t], sk[i]).value for i in ds.train]
                np.testing.assert_allclose(rows[ti], want, rtol=1e-10)

    def test_sampling_source(self):
        ds, _, _ = _blobs(9, 20, 5, 10)
        rows = list(distance_rows(ds, 4, DistanceSource("sampling", 10, 1)))
        assert len(rows) == 5 and rows[0].shape == (20,)

    def test_d6_requires_p6(self):
        ds, _, _ = _blobs(9, 20, 5, 10)
        with pytest.raises(ValueError):
            knn_classify(ds, 1, 4, DistanceSource("d6-1p", 8))
        assert 0 <= knn_classify(ds, 1, 6, DistanceSource("d6-1p", 8)).error_rate <= 1

    def test_bad_source(self):
        with pytest.raises(ValueError):
            DistanceSource("magic", 8)
        with pytest.raises(ValueError):
            DistanceSource("1p", 0)

    def test_repeat_is_deterministic_and_threaded(self):
        ds, _, _ = _blobs(10, 60, 30, 10)
        seeds = trial_seeds(0, 6)
        a = knn_repeat(ds, 3, 4, "1p", 64, seeds, threads=1)
        b = knn_repeat(ds, 3, 4, "1p", 64, seeds, threads=3)
        assert a.per_repeat == b.per_repeat
        assert a.std_error == pytest.approx(np.std(a.per_repeat, ddof=1))

    def test_converges_toward_exact(self):
        ds = vocabulary_dataset(150, 150, seed=3)
        exact = knn_classify(ds, 5, 4).error_rate
        seeds = trial_seeds(1, 8)
        gaps = [abs(knn_repeat(ds, 5, 4, "1p", k, seeds).error_rate - exact) for k in (16, 64, 256, 1024)]
        assert gaps[-1] < gaps[0]
        assert gaps[-1] < 0.03


class TestVocabularyDataset:
    def test_shape(self):
        ds = vocabulary_dataset(40, 20, dim=100, nnz=10, vocab_size=30, seed=1)
        assert len(ds.rows) == 60 and ds.train.size == 40
        assert all(r.nnz == 10 for r in ds.rows)
        np.testing.assert_allclose([np.linalg.norm(r.values) for r in ds.rows], 1.0)
        assert set(np.unique(ds.labels)) == {0, 1}

    def test_invalid(self):
        with pytest.raises(ValueError):
            vocabulary_dataset(5, 5, dim=100, vocab_size=50)


class TestCsv:
    def test_columns(self):
        ds, _, _ = _blobs(11, 30, 10, 4)
        buf = io.StringIO()
        write_knn_csv(p_sweep(ds, [1, 3], [2, 4]), buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "m,p,distance_source,k,seed_repeats,mean_error,std_error"
        assert len(lines) == 5
        assert lines[1].split(",")[:5] == ["1", "2", "exact", "0", "1"]
