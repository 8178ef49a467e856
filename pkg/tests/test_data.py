import itertools

import numpy as np
import pytest

from ftcal import (
    LabeledFeatures,
    LabeledLogits,
    LabelPartition,
    LinearHead,
    ValidationError,
    make_greedy_similar_split,
    make_random_split,
)


class TestLabelPartition:
    def test_complement(self):
        p = LabelPartition(5, (1, 3))
        assert p.absent == (0, 2, 4)
        assert sorted(p.fine_tuning + p.absent) == list(range(5))

    def test_sorts_and_dedup_rejects(self):
        assert LabelPartition(4, (2, 0)).fine_tuning == (0, 2)
        with pytest.raises(ValidationError):
            LabelPartition(4, (0, 0, 1))

    @pytest.mark.parametrize("bad", [(), (0, 1, 2, 3), (4,), (-1,)])
    def test_invalid_subsets(self, bad):
        with pytest.raises(ValidationError):
            LabelPartition(4, bad)

    def test_partition_covers_label_space_exhaustively(self):
        for seed in range(50):
            c = int(np.random.default_rng(seed).integers(2, 12))
            k = int(np.random.default_rng(seed + 1).integers(1, c))
            p = make_random_split(c, k, seed)
            seen, absent = set(p.fine_tuning), set(p.absent)
            assert seen | absent == set(range(c))
            assert seen & absent == set()


class TestContainers:
    def test_logits_validation(self):
        with pytest.raises(ValidationError):
            LabeledLogits([[1.0, np.nan]], [0])
        with pytest.raises(ValidationError):
            LabeledLogits([[1.0, 2.0]], [2])  # label out of range
        with pytest.raises(ValidationError):
            LabeledLogits([[1.0, 2.0], [0.0, 1.0]], [0])  # count mismatch

    def test_arrays_are_read_only(self):
        logits = LabeledLogits([[1.0, 2.0]], [0])
        with pytest.raises(ValueError):
            logits.values[0, 0] = 5.0

    def test_features_and_head(self):
        feats = LabeledFeatures([[1.0, 2.0, 3.0]], [7])
        assert feats.dim == 3
        with pytest.raises(ValidationError):
            LinearHead([[1.0, 2.0]])  # single class
        with pytest.raises(ValidationError):
            LinearHead([[np.inf, 0.0], [0.0, 1.0]])


class TestRandomSplit:
    def test_full_set_is_rejected(self):
        with pytest.raises(ValidationError):
            make_random_split(4, 4, seed=0)
        with pytest.raises(ValidationError):
            make_random_split(4, 0, seed=0)

    def test_two_class_split_is_deterministic(self):
        for seed in (0, 1, 99):
            first = make_random_split(2, 1, seed)
            assert first.fine_tuning in ((0,), (1,))
            assert first == make_random_split(2, 1, seed)

    def test_same_seed_same_split(self):
        assert make_random_split(10, 5, seed=7) == make_random_split(10, 5, seed=7)

    def test_uniform_over_subsets(self):
        # C=6, k=3: all 20 subsets must appear, each within 5 binomial
        # standard errors of the uniform expectation.
        counts = {}
        trials = 10_000
        for seed in range(trials):
            s = make_random_split(6, 3, seed).fine_tuning
            counts[s] = counts.get(s, 0) + 1
        assert len(counts) == 20
        expected = trials / 20
        tolerance = 5 * np.sqrt(trials * (1 / 20) * (19 / 20))
        for subset, count in counts.items():
            assert abs(count - expected) <= tolerance, (subset, count)


def _oracle_total_distance(means, subset):
    total = 0.0
    subset = sorted(subset)
    for i in range(len(subset)):
        for j in range(i + 1, len(subset)):
            total += float(np.linalg.norm(np.asarray(means[subset[i]]) - means[subset[j]]))
    return total


def _oracle_greedy(means, k):
    """Independent re-implementation: closest pair seed, then min added cost."""
    means = np.asarray(means, dtype=float)
    c = means.shape[0]
    if k == 1:
        return (0,)
    best_pair, best_dist = None, np.inf
    for i in range(c):
        for j in range(i + 1, c):
            d = float(np.linalg.norm(means[i] - means[j]))
            if d < best_dist:
                best_pair, best_dist = [i, j], d
    members = best_pair
    while len(members) < k:
        best_c, best_cost = None, np.inf
        for cand in range(c):  # ascending scan + strict < keeps the lowest index on ties
            if cand in members:
                continue
            cost = sum(float(np.linalg.norm(means[cand] - means[m])) for m in members)
            if cost < best_cost:
                best_c, best_cost = cand, cost
        members.append(best_c)
    return tuple(sorted(members))


class TestGreedySplit:
    def test_line_instance_matches_exhaustive_optimum(self):
        means = [[0.0], [1.0], [10.0], [11.0]]
        got = make_greedy_similar_split(means, 2).fine_tuning
        best = min(
            itertools.combinations(range(4), 2),
            key=lambda s: _oracle_total_distance(means, s),
        )
        assert got == (0, 1)
        assert got == tuple(best)

    def test_identical_means_tie_rule(self):
        means = np.ones((5, 3))
        assert make_greedy_similar_split(means, 4).fine_tuning == (0, 1, 2, 3)

    def test_five_point_instance_against_independent_greedy(self):
        means = [(0.0, 0.0), (0.0, 1.0), (5.0, 5.0), (5.0, 6.0), (9.0, 9.0)]
        got = make_greedy_similar_split(means, 3).fine_tuning
        assert got == _oracle_greedy(means, 3) == (0, 1, 2)
        # The greedy heuristic is not exhaustive: enumeration finds a
        # strictly cheaper 3-subset on this instance.
        best = min(
            itertools.combinations(range(5), 3),
            key=lambda s: _oracle_total_distance(means, s),
        )
        assert tuple(best) == (2, 3, 4)
        assert _oracle_total_distance(means, best) < _oracle_total_distance(means, got)

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        means = rng.normal(size=(8, 4))
        a = make_greedy_similar_split(means, 5)
        b = make_greedy_similar_split(means, 5)
        assert a == b
        assert a.fine_tuning == _oracle_greedy(means, 5)

    def test_k_one_degenerates_to_class_zero(self):
        assert make_greedy_similar_split(np.random.default_rng(0).normal(size=(4, 2)), 1).fine_tuning == (0,)

    def test_k_out_of_range(self):
        with pytest.raises(ValidationError):
            make_greedy_similar_split(np.zeros((3, 2)), 3)
