import numpy as np
import pytest

from ftcal import (
    LabeledFeatures,
    LabelPartition,
    MissingClassError,
    ToySpec,
    ValidationError,
    class_means,
    gen_toy_data,
    ncm_predict,
)


class TestClassMeans:
    def test_single_sample_is_normalized(self):
        feats = LabeledFeatures([[3.0, 0.0]], [0])
        means = class_means(feats, {0})
        np.testing.assert_allclose(means.means, [[1.0, 0.0]])
        assert means.counts.tolist() == [1]

    def test_two_sample_average_is_not_renormalized(self):
        feats = LabeledFeatures([[1.0, 0.0], [0.0, 1.0]], [0, 0])
        means = class_means(feats, {0})
        np.testing.assert_allclose(means.means, [[0.5, 0.5]])

    def test_duplicating_samples_keeps_means(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(10, 3))
        labels = rng.integers(0, 2, 10)
        once = class_means(LabeledFeatures(values, labels), {0, 1})
        twice = class_means(
            LabeledFeatures(np.vstack([values, values]), np.concatenate([labels, labels])),
            {0, 1},
        )
        np.testing.assert_allclose(once.means, twice.means)

    def test_missing_class_and_zero_norm(self):
        feats = LabeledFeatures([[1.0, 0.0]], [0])
        with pytest.raises(MissingClassError):
            class_means(feats, {0, 1})
        with pytest.raises(ValidationError, match="row 0"):
            class_means(LabeledFeatures([[0.0, 0.0]], [0]), {0})


class TestNcmPredict:
    def test_basic_nearest_mean(self):
        means = class_means(LabeledFeatures([[1.0, 0.0], [0.0, 1.0]], [0, 1]), {0, 1})
        feats = LabeledFeatures([[5.0, 0.0]], [0])
        assert ncm_predict(feats, means, {0, 1}).tolist() == [0]

    def test_positive_scaling_invariance(self):
        rng = np.random.default_rng(1)
        ref = LabeledFeatures(rng.normal(size=(40, 4)), rng.integers(0, 3, 40))
        means = class_means(ref, {0, 1, 2})
        queries = rng.normal(size=(25, 4))
        labels = np.zeros(25, dtype=int)
        base = ncm_predict(LabeledFeatures(queries, labels), means, {0, 1, 2})
        scales = rng.uniform(0.01, 100.0, size=(25, 1))
        scaled = ncm_predict(LabeledFeatures(queries * scales, labels), means, {0, 1, 2})
        np.testing.assert_array_equal(base, scaled)

    def test_matches_exhaustive_search_oracle(self):
        rng = np.random.default_rng(2)
        ref = LabeledFeatures(rng.normal(size=(60, 5)), rng.integers(0, 4, 60))
        means = class_means(ref, {0, 1, 2, 3})
        queries = rng.normal(size=(20, 5))
        got = ncm_predict(LabeledFeatures(queries, np.zeros(20, dtype=int)), means, {0, 1, 2, 3})
        expected = []
        for row in queries:
            unit = row / np.linalg.norm(row)
            dists = [float(np.sum((unit - means.means[c]) ** 2)) for c in range(4)]
            expected.append(int(np.argmin(dists)))
        np.testing.assert_array_equal(got, expected)

    def test_restriction_bound(self):
        rng = np.random.default_rng(3)
        p = LabelPartition(5, (0, 1))
        ref = LabeledFeatures(rng.normal(size=(100, 4)), rng.integers(0, 5, 100))
        means = class_means(ref, range(5))
        absent_rows = rng.normal(size=(50, 4))
        absent_labels = rng.integers(2, 5, 50)
        feats = LabeledFeatures(absent_rows, absent_labels)
        over_y = ncm_predict(feats, means, range(5))
        over_u = ncm_predict(feats, means, p.absent)
        assert np.mean(over_u == absent_labels) >= np.mean(over_y == absent_labels)

    def test_restriction_must_be_covered(self):
        means = class_means(LabeledFeatures([[1.0, 0.0]], [0]), {0})
        with pytest.raises(MissingClassError):
            ncm_predict(LabeledFeatures([[1.0, 0.0]], [0]), means, {0, 3})

    def test_well_separated_gaussians_reach_95_percent(self):
        pretraining, _ = gen_toy_data(ToySpec(), seed=123)
        means = class_means(pretraining, range(4))
        preds = ncm_predict(pretraining, means, range(4))
        assert np.mean(preds == pretraining.labels) >= 0.95
