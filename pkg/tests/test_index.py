import numpy as np
import pytest

from feds.exceptions import (
    BadNprobe,
    DimensionMismatch,
    DuplicateId,
    NotTrained,
    StoreError,
    TooFewVectors,
    ValidationError,
)
from feds.index import FlatIndex, IvfFlatIndex, kmeans_centroids, load_ivf_index, save_ivf_index
from feds.pooling import mean_pool
from feds.vectors import cosine_similarity, l2_distance


def _fill(index, X, offset=0):
    for i, row in enumerate(X):
        index.add(offset + i, row, label_id=i % 4)


class TestFlatIndex:
    def test_empty_search(self):
        assert FlatIndex(4).search(np.ones(4, np.float32), 5, "cosine") == []

    def test_two_entry_cosine(self):
        idx = FlatIndex(2)
        idx.add(1, [1, 0], 0)
        idx.add(2, [0, 1], 1)
        hits = idx.search([1, 0], 1, "cosine")
        assert len(hits) == 1
        assert hits[0].id == 1 and hits[0].score == 1.0 and hits[0].label_id == 0

    def test_matches_naive_sort_oracle(self):
        rng = np.random.default_rng(31)
        X = rng.normal(size=(200, 8)).astype(np.float32)
        idx = FlatIndex(8)
        _fill(idx, X)
        q = rng.normal(size=8).astype(np.float32)
        hits = idx.search(q, 10, "l2")
        naive = sorted((l2_distance(X[i], q), i) for i in range(200))[:10]
        assert [h.id for h in hits] == [i for _, i in naive]
        assert [h.score for h in hits] == pytest.approx([d for d, _ in naive], abs=1e-9)
        hits_c = idx.search(q, 10, "cosine")
        naive_c = sorted(((-cosine_similarity(X[i], q), i) for i in range(200)))[:10]
        assert [h.id for h in hits_c] == [i for _, i in naive_c]

    def test_tie_ordering_by_id(self):
        idx = FlatIndex(2)
        idx.add(7, [1, 0], 0)
        idx.add(3, [1, 0], 0)
        idx.add(5, [0, 1], 0)
        hits = idx.search([1, 0], 3, "cosine")
        assert [h.id for h in hits] == [3, 7, 5]

    def test_insertion_order_invariance(self):
        rng = np.random.default_rng(32)
        X = rng.normal(size=(50, 4)).astype(np.float32)
        a, b = FlatIndex(4), FlatIndex(4)
        order = rng.permutation(50)
        for i in range(50):
            a.add(i, X[i])
        for i in order:
            b.add(int(i), X[i])
        q = rng.normal(size=4).astype(np.float32)
        assert a.search(q, 50, "l2") == b.search(q, 50, "l2")

    def test_k_larger_than_entries(self):
        idx = FlatIndex(2)
        idx.add(1, [1, 0])
        assert len(idx.search([1, 0], 10, "l2")) == 1

    def test_duplicate_id(self):
        idx = FlatIndex(2)
        idx.add(1, [1, 0])
        with pytest.raises(DuplicateId):
            idx.add(1, [0, 1])

    def test_dim_mismatch(self):
        idx = FlatIndex(3)
        with pytest.raises(DimensionMismatch):
            idx.add(1, [1, 0])
        idx.add(1, [1, 0, 0])
        with pytest.raises(DimensionMismatch):
            idx.search([1, 0], 1, "l2")

    def test_bad_k(self):
        idx = FlatIndex(2)
        idx.add(1, [1, 0])
        with pytest.raises(ValidationError):
            idx.search([1, 0], 0, "l2")


class TestKmeans:
    def test_single_cluster_is_global_mean(self):
        rng = np.random.default_rng(33)
        X = rng.normal(size=(40, 6)).astype(np.float32)
        cents = kmeans_centroids(X, 1, seed=0)
        np.testing.assert_array_equal(cents[0], mean_pool(list(X)))

    def test_one_point_per_cluster(self):
        rng = np.random.default_rng(34)
        X = rng.normal(size=(8, 3)).astype(np.float32)
        cents = kmeans_centroids(X, 8, seed=1)
        got = {tuple(c) for c in cents}
        expect = {tuple(row) for row in X}
        assert got == expect

    def test_two_separated_blobs(self):
        rng = np.random.default_rng(35)
        blob_a = rng.normal(loc=0.0, scale=0.5, size=(60, 4))
        blob_b = rng.normal(loc=20.0, scale=0.5, size=(60, 4))
        X = np.vstack([blob_a, blob_b]).astype(np.float32)
        cents = kmeans_centroids(X, 2, seed=2)
        near_a = cents[0] if cents[0][0] < 10 else cents[1]
        near_b = cents[1] if cents[0][0] < 10 else cents[0]
        for i, row in enumerate(X):
            own, other = (near_a, near_b) if i < 60 else (near_b, near_a)
            assert l2_distance(row, own) < l2_distance(row, other)

    def test_train_validations(self):
        X = np.ones((3, 2), np.float32)
        with pytest.raises(TooFewVectors):
            IvfFlatIndex.train(X, nlist=4, seed=0)
        with pytest.raises(ValidationError):
            IvfFlatIndex.train(X, nlist=0, seed=0)


class TestIvfIndex:
    def test_train_returns_trained_empty(self):
        X = np.random.default_rng(36).normal(size=(30, 4)).astype(np.float32)
        ivf = IvfFlatIndex.train(X, nlist=4, seed=3)
        assert ivf.trained and len(ivf) == 0
        assert ivf.centroids.shape == (4, 4)

    def test_first_add(self):
        X = np.random.default_rng(37).normal(size=(30, 4)).astype(np.float32)
        ivf = IvfFlatIndex.train(X, nlist=4, seed=3)
        ivf.add(0, X[0], 1)
        assert sum(ivf.partition_sizes()) == 1

    def test_vector_equal_to_centroid_lands_there(self):
        X = np.random.default_rng(38).normal(size=(50, 4)).astype(np.float32)
        ivf = IvfFlatIndex.train(X, nlist=5, seed=4)
        for p in range(5):
            ivf.add(p, ivf.centroids[p], 0)
            sizes = ivf.partition_sizes()
            assert sizes[p] >= 1
        assert sum(ivf.partition_sizes()) == 5

    def test_membership_invariant_after_many_adds(self):
        rng = np.random.default_rng(39)
        X = rng.normal(size=(1000, 8)).astype(np.float32)
        ivf = IvfFlatIndex.train(X[:200], nlist=8, seed=5)
        _fill(ivf, X)
        assert sum(ivf.partition_sizes()) == 1000
        for p in range(8):
            for row in ivf._part_rows[p]:
                dists = [l2_distance(row, ivf.centroids[j]) for j in range(8)]
                best = min(range(8), key=lambda j: (dists[j], j))
                assert best == p

    def test_not_trained(self):
        ivf = IvfFlatIndex(4, 2)
        with pytest.raises(NotTrained):
            ivf.add(0, np.ones(4, np.float32))
        with pytest.raises(NotTrained):
            ivf.search(np.ones(4, np.float32), 1, 1)

    def test_duplicate_id(self):
        X = np.random.default_rng(40).normal(size=(10, 4)).astype(np.float32)
        ivf = IvfFlatIndex.train(X, nlist=2, seed=6)
        ivf.add(1, X[0])
        with pytest.raises(DuplicateId):
            ivf.add(1, X[1])

    def test_bad_nprobe(self):
        X = np.random.default_rng(41).normal(size=(10, 4)).astype(np.float32)
        ivf = IvfFlatIndex.train(X, nlist=4, seed=7)
        for bad in (0, 5):
            with pytest.raises(BadNprobe):
                ivf.search(X[0], 1, bad)

    @pytest.mark.parametrize("measure", ["cosine", "l2"])
    def test_full_probe_equals_flat_exactly(self, measure):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(300, 8)).astype(np.float32)
        flat = FlatIndex(8)
        _fill(flat, X)
        ivf = IvfFlatIndex.train(X, nlist=6, seed=8)
        _fill(ivf, X)
        for _ in range(20):
            q = rng.normal(size=8).astype(np.float32)
            assert ivf.search(q, 10, 6, measure) == flat.search(q, 10, measure)

    def test_k_exceeds_probed_entries(self):
        rng = np.random.default_rng(43)
        X = rng.normal(size=(20, 4)).astype(np.float32)
        ivf = IvfFlatIndex.train(X, nlist=4, seed=9)
        _fill(ivf, X)
        hits = ivf.search(X[0], 100, 1, "l2")
        assert 0 < len(hits) <= 20
        scores = [h.score for h in hits]
        assert scores == sorted(scores)

    def test_monotone_recall(self):
        rng = np.random.default_rng(44)
        centers = rng.normal(size=(16, 8)) * 3
        X = (centers[rng.integers(0, 16, 2000)] + rng.normal(size=(2000, 8))).astype(np.float32)
        flat = FlatIndex(8)
        _fill(flat, X)
        ivf = IvfFlatIndex.train(X, nlist=8, seed=10)
        _fill(ivf, X)
        queries = (centers[rng.integers(0, 16, 30)] + rng.normal(size=(30, 8))).astype(np.float32)
        last = -1.0
        for nprobe in (1, 2, 4, 8):
            recalls = []
            for q in queries:
                truth = {h.id for h in flat.search(q, 10, "l2")}
                got = {h.id for h in ivf.search(q, 10, nprobe, "l2")}
                recalls.append(len(truth & got) / len(truth))
            r = float(np.mean(recalls))
            assert r >= last
            last = r
        assert last == 1.0


class TestIndexPersistence:
    def test_save_load_roundtrip(self, tmp_path):
        from feds.store import StoredSample

        rng = np.random.default_rng(45)
        X = rng.normal(size=(80, 6)).astype(np.float32)
        samples = [StoredSample(id=i, label_id=i % 3, vector=X[i]) for i in range(80)]
        ivf = IvfFlatIndex.train(X, nlist=4, seed=11)
        for s in samples:
            ivf.add(s.id, s.vector, s.label_id)
        path = tmp_path / "index.feds"
        save_ivf_index(ivf, path)
        loaded = load_ivf_index(path, samples)
        assert loaded.partition_sizes() == ivf.partition_sizes()
        q = rng.normal(size=6).astype(np.float32)
        assert loaded.search(q, 10, 4, "l2") == ivf.search(q, 10, 4, "l2")

    def test_load_rejects_mismatched_samples(self, tmp_path):
        from feds.store import StoredSample

        rng = np.random.default_rng(46)
        X = rng.normal(size=(10, 4)).astype(np.float32)
        samples = [StoredSample(id=i, label_id=0, vector=X[i]) for i in range(10)]
        ivf = IvfFlatIndex.train(X, nlist=2, seed=12)
        for s in samples:
            ivf.add(s.id, s.vector, s.label_id)
        path = tmp_path / "index.feds"
        save_ivf_index(ivf, path)
        with pytest.raises(StoreError):
            load_ivf_index(path, samples[:5])

    def test_save_untrained_rejected(self, tmp_path):
        with pytest.raises(NotTrained):
            save_ivf_index(IvfFlatIndex(4, 2), tmp_path / "x.feds")
