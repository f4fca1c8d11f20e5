import itertools

import numpy as np
import pytest

from proxyslice.datasets import Sample, from_samples, synth_blobs
from proxyslice.sampling import (KMeansModel, ScoreVector, class_quota,
                                 centroid_distance_scores, global_quota,
                                 kmeans_fit, sample_by_score, sample_cc_or,
                                 sample_cc_random, sample_km_or, sample_random)


def points_dataset(points, labels=None):
    points = np.asarray(points, dtype=np.float64)
    labels = labels or [0] * len(points)
    return from_samples(
        [Sample(p.reshape(1, -1, 1), l) for p, l in zip(points, labels)],
        "points")


class TestQuota:
    def test_global_floor(self):
        assert global_quota(50_000, 0.25).total == 12_500
        assert global_quota(10, 0.33).total == 3

    def test_class_quota_tie_to_lower_class(self):
        q = class_quota([3, 5], 0.5)
        assert q.total == 4
        assert q.per_class == (2, 2)

    def test_class_quota_sums_and_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            sizes = rng.integers(1, 40, size=rng.integers(2, 8))
            r = rng.uniform(0.05, 1.0)
            q = class_quota(sizes, r)
            assert sum(q.per_class) == q.total == int(np.floor(r * sizes.sum()))
            assert all(abs(pc - r * s) < 1 for pc, s in zip(q.per_class, sizes))

    def test_bad_ratio(self):
        with pytest.raises(ValueError):
            global_quota(10, 0.0)
        with pytest.raises(ValueError):
            global_quota(10, 1.2)


class TestRandomSampling:
    def test_exact_count(self):
        ds = synth_blobs(4, 25, 3, 0.1, 0)
        assert len(sample_random(ds, 0.25, 1)) == 25

    def test_identity_at_one(self):
        ds = synth_blobs(2, 5, 3, 0.1, 0)
        assert sample_random(ds, 1.0, 9).indices == tuple(range(10))

    def test_determinism(self):
        ds = synth_blobs(3, 10, 4, 0.1, 0)
        assert sample_random(ds, 0.4, 5) == sample_random(ds, 0.4, 5)
        assert sample_random(ds, 0.4, 5) != sample_random(ds, 0.4, 6)

    def test_uniform_inclusion_frequency(self):
        # Monte Carlo: inclusion probability of each index is ~ r
        ds = synth_blobs(2, 5, 2, 0.1, 3)
        counts = np.zeros(10)
        n_trials = 10_000
        for seed in range(n_trials):
            for i in sample_random(ds, 0.5, seed).indices:
                counts[i] += 1
        freqs = counts / n_trials
        assert np.all(np.abs(freqs - 0.5) < 0.02)


class TestClassConditionalRandom:
    def test_per_class_counts(self):
        ds = synth_blobs(5, 10, 3, 0.1, 0)
        proxy = sample_cc_random(ds, 0.5, 2)
        labels = ds.labels()
        for cls in range(5):
            assert sum(labels[i] == cls for i in proxy.indices) == 5

    def test_identity_at_one(self):
        ds = synth_blobs(3, 4, 2, 0.1, 0)
        assert sample_cc_random(ds, 1.0, 0).indices == tuple(range(12))

    def test_uneven_classes(self):
        ds = points_dataset(np.zeros((8, 2)), [0, 0, 0, 1, 1, 1, 1, 1])
        proxy = sample_cc_random(ds, 0.5, 0)
        labels = ds.labels()
        per = [sum(labels[i] == c for i in proxy.indices) for c in (0, 1)]
        assert per == [2, 2]  # quota tie goes to class 0


class TestKMeans:
    def test_symmetric_clusters(self):
        ds = points_dataset([(0, 0), (0, 1), (10, 0), (10, 1)])
        model = kmeans_fit(ds, 2, seed=0)
        got = sorted(map(tuple, model.centroids))
        assert np.allclose(got, [(0, 0.5), (10, 0.5)])
        assert model.inertia == pytest.approx(1.0)

    def test_k_equals_n(self):
        ds = synth_blobs(2, 4, 3, 0.2, 1)
        model = kmeans_fit(ds, len(ds), seed=0)
        assert model.inertia == pytest.approx(0.0, abs=1e-20)

    def test_local_optimality_single_swap(self):
        # no single-point reassignment may lower inertia
        rng = np.random.default_rng(4)
        pts = rng.standard_normal((12, 2))
        model = kmeans_fit(points_dataset(pts), 2, seed=1)
        d2 = np.sum((pts[:, None, :] - model.centroids[None]) ** 2, axis=2)
        own = d2[np.arange(12), model.assignments]
        assert np.all(own <= d2.min(axis=1) + 1e-12)

    def test_assignment_tie_to_lower_centroid(self):
        pts = np.array([[0.0, 0.0]])
        model = KMeansModel(np.array([[1.0, 0.0], [-1.0, 0.0]]),
                            np.array([0]), 1.0)
        ds = points_dataset(pts)
        scores = centroid_distance_scores(ds, model)
        assert scores.scores[0] == pytest.approx(1.0)

    def test_bad_k(self):
        ds = synth_blobs(2, 2, 2, 0.1, 0)
        with pytest.raises(ValueError):
            kmeans_fit(ds, 0, seed=0)
        with pytest.raises(ValueError):
            kmeans_fit(ds, 5, seed=0)


class TestKMeansOutlierRemoval:
    def test_hand_example_single_centroid(self):
        # centroid of {0,1,2,100} is 25.75; the far point is dropped
        ds = points_dataset([[0.0], [1.0], [2.0], [100.0]])
        proxy = sample_km_or(ds, 0.75, k=1, seed=0)
        assert proxy.indices == (0, 1, 2)

    def test_identity_at_one(self):
        ds = synth_blobs(2, 6, 3, 0.1, 0)
        assert sample_km_or(ds, 1.0, k=2, seed=0).indices == tuple(range(12))

    def test_matches_brute_force_given_centroids(self):
        rng = np.random.default_rng(7)
        for trial in range(20):
            pts = rng.standard_normal((10, 2))
            ds = points_dataset(pts)
            model = kmeans_fit(ds, 2, seed=trial)
            scores = centroid_distance_scores(ds, model).scores
            k = 5
            best = min(itertools.combinations(range(10), k),
                       key=lambda sub: (sum(scores[i] for i in sub), sub))
            proxy = sample_km_or(ds, 0.5, k=2, seed=trial)
            assert sum(scores[i] for i in proxy.indices) == pytest.approx(
                sum(scores[i] for i in best))


class TestClassConditionalOutlierRemoval:
    def test_hand_example(self):
        # one class at {0,1,2,3}: centroid 1.5, keep the middle two
        ds = points_dataset([[0.0], [1.0], [2.0], [3.0]])
        assert sample_cc_or(ds, 0.5).indices == (1, 2)

    def test_identity_at_one(self):
        ds = synth_blobs(3, 5, 2, 0.1, 0)
        assert sample_cc_or(ds, 1.0).indices == tuple(range(15))

    def test_matches_per_class_brute_force(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            n0, n1 = rng.integers(4, 9, 2)
            pts = rng.standard_normal((n0 + n1, 3))
            labels = [0] * n0 + [1] * n1
            ds = points_dataset(pts, labels)
            proxy = sample_cc_or(ds, 0.5)
            flat = ds.flat_pixels()
            quotas = class_quota([len(c) for c in ds.class_index], 0.5)
            expected = []
            for cls, members in enumerate(ds.class_index):
                members = np.asarray(members)
                mu = flat[members].mean(axis=0)
                dist = np.linalg.norm(flat[members] - mu, axis=1)
                best = min(itertools.combinations(range(len(members)),
                                                  quotas.per_class[cls]),
                           key=lambda sub: (sum(dist[i] for i in sub), sub))
                expected.extend(int(members[i]) for i in best)
            total = lambda idx: sum(
                np.linalg.norm(flat[i] - flat[np.asarray(ds.class_index[ds.samples[i].label])].mean(axis=0))
                for i in idx)
            assert total(proxy.indices) == pytest.approx(total(expected))


class TestScoreSampling:
    def ds4(self):
        return points_dataset(np.zeros((4, 2)))

    def test_keep_lowest(self):
        scores = ScoreVector(np.array([5.0, 1.0, 3.0, 2.0]), "classifier_loss")
        proxy = sample_by_score(self.ds4(), scores, 0.5)
        assert proxy.indices == (1, 3)

    def test_tie_to_lower_index(self):
        ds = points_dataset(np.zeros((3, 2)))
        scores = ScoreVector(np.array([1.0, 1.0, 2.0]), "classifier_loss")
        assert sample_by_score(ds, scores, 2 / 3).indices == (0, 1)

    def test_keep_highest(self):
        scores = ScoreVector(np.array([5.0, 1.0, 3.0, 2.0]), "classifier_loss")
        proxy = sample_by_score(self.ds4(), scores, 0.5, "keep_highest")
        assert proxy.indices == (0, 2)

    def test_complementarity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            vals = rng.permutation(10).astype(float)
            ds = points_dataset(np.zeros((10, 2)))
            scores = ScoreVector(vals, "classifier_loss")
            low = set(sample_by_score(ds, scores, 0.5, "keep_lowest").indices)
            high = set(sample_by_score(ds, scores, 0.5, "keep_highest").indices)
            assert low | high == set(range(10)) and not (low & high)

    def test_monotone_in_ratio(self):
        rng = np.random.default_rng(1)
        vals = rng.standard_normal(20)
        ds = points_dataset(np.zeros((20, 2)))
        scores = ScoreVector(vals, "reconstruction_loss")
        prev: set = set()
        for r in (0.1, 0.3, 0.5, 0.8, 1.0):
            cur = set(sample_by_score(ds, scores, r).indices)
            assert prev <= cur
            prev = cur

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            vals = rng.standard_normal(12)
            ds = points_dataset(np.zeros((12, 2)))
            scores = ScoreVector(vals, "classifier_loss")
            proxy = sample_by_score(ds, scores, 0.5)
            best = min(itertools.combinations(range(12), 6),
                       key=lambda sub: (sum(vals[i] for i in sub), sub))
            assert proxy.indices == best

    def test_non_finite_rejected(self):
        vals = np.array([1.0, np.nan, 2.0])
        with pytest.raises(ValueError, match="index 1"):
            ScoreVector(vals, "classifier_loss")

    def test_length_mismatch(self):
        scores = ScoreVector(np.array([1.0, 2.0]), "classifier_loss")
        with pytest.raises(ValueError, match="length"):
            sample_by_score(self.ds4(), scores, 0.5)
