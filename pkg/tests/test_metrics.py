import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ftcal import (
    EmptyGroupError,
    LabeledLogits,
    LabelPartition,
    acc_report,
    accuracy,
    ausuc,
    decompose,
    format_curve_csv,
    predict_restricted,
    seen_unseen_curve,
)


def random_instance(seed, max_n=60, max_c=10):
    """Random logits, labels and a partition; both groups populated."""
    rng = np.random.default_rng(seed)
    c = int(rng.integers(3, max_c + 1))
    k = int(rng.integers(1, c))
    partition = LabelPartition(c, tuple(np.sort(rng.permutation(c)[:k]).tolist()))
    n = int(rng.integers(4, max_n + 1))
    labels = np.concatenate(
        [
            rng.choice(partition.group_indices("S"), size=max(1, n // 2)),
            rng.choice(partition.group_indices("U"), size=max(1, n - n // 2)),
        ]
    )
    values = rng.normal(0.0, 2.0, size=(labels.size, c))
    return LabeledLogits(values, labels), partition


class TestPredictRestricted:
    def test_unrestricted(self):
        logits = LabeledLogits([[2.0, 1.0, 1.5]], [0])
        assert predict_restricted(logits, {0, 1, 2}).tolist() == [0]

    def test_restriction_changes_winner(self):
        logits = LabeledLogits([[2.0, 1.0, 1.5]], [0])
        assert predict_restricted(logits, {1, 2}).tolist() == [2]

    def test_tie_takes_lowest_index(self):
        logits = LabeledLogits([[1.0, 1.0, 0.0]], [0])
        assert predict_restricted(logits, {0, 1}).tolist() == [0]

    def test_empty_restriction(self):
        logits = LabeledLogits([[1.0, 0.0]], [0])
        with pytest.raises(Exception):
            predict_restricted(logits, set())


class TestAccuracy:
    def test_hand_enumeration_all_correct(self):
        logits = LabeledLogits([[3.0, 0.0, 0.0], [0.0, 0.0, 1.0]], [0, 2])
        p = LabelPartition(3, (0, 1))
        assert accuracy(logits, p, "S", "Y") == 1.0
        assert accuracy(logits, p, "U", "Y") == 1.0

    def test_hand_enumeration_absent_buried(self):
        logits = LabeledLogits([[3.0, 0.0, 0.0], [1.0, 0.0, 0.5]], [0, 2])
        p = LabelPartition(3, (0, 1))
        assert accuracy(logits, p, "U", "Y") == 0.0  # sample 2 lands on class 0
        assert accuracy(logits, p, "U", "U") == 1.0

    def test_argmax_labels_give_one(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(20, 5))
        logits = LabeledLogits(values, np.argmax(values, axis=1))
        assert accuracy(logits, LabelPartition(5, (0, 1)), "Y", "Y") == 1.0

    def test_empty_group_is_an_error(self):
        logits = LabeledLogits([[1.0, 0.0, 0.0]], [0])
        with pytest.raises(EmptyGroupError):
            accuracy(logits, LabelPartition(3, (0, 1)), "U", "Y")

    def test_restriction_never_loses_correct_predictions(self):
        for seed in range(30):
            logits, p = random_instance(seed)
            gamma = float(np.random.default_rng(seed).normal(0, 3))
            report = acc_report(logits, p, gamma=gamma)
            assert report.acc_u_u >= report.acc_u_y
            assert report.acc_s_s >= report.acc_s_y


class TestDecompose:
    def test_uniform_logits_split_evenly(self):
        p = LabelPartition(4, (0, 1))
        p_absent, within_s, within_u = decompose([1.0, 1.0, 1.0, 1.0], p)
        assert p_absent == 0.5
        np.testing.assert_allclose(within_s, [0.5, 0.5])
        np.testing.assert_allclose(within_u, [0.5, 0.5])

    def test_dominant_absent_logit(self):
        p = LabelPartition(3, (0, 1))
        p_absent, _, _ = decompose([0.0, 0.0, 20.0], p)
        assert abs(p_absent - 1.0) < 1e-8

    @given(st.integers(0, 10_000))
    @settings(max_examples=200, deadline=None)
    def test_reconstruction_identity(self, seed):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(3, 12))
        k = int(rng.integers(1, c))
        p = LabelPartition(c, tuple(np.sort(rng.permutation(c)[:k]).tolist()))
        row = rng.normal(0.0, 3.0, size=c)
        p_absent, within_s, within_u = decompose(row, p)
        # independent direct softmax
        z = np.exp(row - row.max())
        softmax = z / z.sum()
        seen, absent = p.group_indices("S"), p.group_indices("U")
        np.testing.assert_allclose(p_absent * within_u, softmax[absent], atol=1e-12, rtol=0)
        np.testing.assert_allclose(
            (1.0 - p_absent) * within_s, softmax[seen], atol=1e-12, rtol=0
        )


def grid_curve_points(values, labels, partition, gammas):
    """Accuracy pairs at each gamma, via direct group-max comparison."""
    seen_cols = partition.group_indices("S")
    absent_cols = partition.group_indices("U")
    max_s = values[:, seen_cols].max(axis=1)
    max_u = values[:, absent_cols].max(axis=1)
    pred_s = seen_cols[np.argmax(values[:, seen_cols], axis=1)]
    pred_u = absent_cols[np.argmax(values[:, absent_cols], axis=1)]
    in_s = np.isin(labels, seen_cols)
    n_s, n_u = int(in_s.sum()), int((~in_s).sum())
    absent_side = max_u[None, :] + np.asarray(gammas)[:, None] > max_s[None, :]
    correct_s = (~absent_side) & (pred_s == labels)[None, :] & in_s[None, :]
    correct_u = absent_side & (pred_u == labels)[None, :] & (~in_s)[None, :]
    return correct_s.sum(axis=1) / n_s, correct_u.sum(axis=1) / n_u


def grid_area(x, y):
    """Area dominated by the sampled points (independent of the package)."""
    width = x - np.append(x[1:], 0.0)
    return float(np.sum(y * width))


class TestSeenUnseenCurve:
    def test_two_sample_hand_instance(self):
        # seen sample flips at 3 - 0.5 = 2.5; absent sample at 1 - 0.5 = 0.5
        logits = LabeledLogits([[3.0, 0.0, 0.5], [1.0, 0.0, 0.5]], [0, 2])
        p = LabelPartition(3, (0, 1))
        curve = seen_unseen_curve(logits, p)
        assert curve.thresholds.tolist() == [0.5, 2.5]
        assert curve.points.tolist() == [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
        assert curve.within_group_acc == (1.0, 1.0)
        assert ausuc(curve) == 1.0

    def test_flip_definition_on_plain_rows(self):
        logits = LabeledLogits([[3.0, 0.0, 0.0], [1.0, 0.0, 0.5]], [0, 2])
        curve = seen_unseen_curve(logits, LabelPartition(3, (0, 1)))
        assert curve.thresholds.tolist() == [0.5, 3.0]

    def test_anti_correlated_instance_stays_on_axes(self):
        # The seen sample leaves group S (gamma > 1) before the absent
        # sample enters group U (gamma > 2): no gamma wins both.
        logits = LabeledLogits([[1.0, 0.0], [2.0, 0.0]], [0, 1])
        p = LabelPartition(2, (0,))
        curve = seen_unseen_curve(logits, p)
        assert all(x == 0.0 or y == 0.0 for x, y in curve.points)
        assert ausuc(curve) == 0.0
        gammas = np.linspace(curve.thresholds[0] - 1, curve.thresholds[-1] + 1, 2001)
        gx, gy = grid_curve_points(logits.values, logits.labels, p, gammas)
        assert np.all((gx == 0.0) | (gy == 0.0))

    def test_all_absent_misclassified_within_group(self):
        logits = LabeledLogits([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]], [0, 2])
        p = LabelPartition(4, (0, 1))
        curve = seen_unseen_curve(logits, p)
        assert curve.within_group_acc[1] == 0.0
        assert np.all(curve.points[:, 1] == 0.0)

    def test_requires_both_groups(self):
        logits = LabeledLogits([[1.0, 0.0]], [0])
        with pytest.raises(EmptyGroupError):
            seen_unseen_curve(logits, LabelPartition(2, (0,)))

    def test_monotone_in_gamma(self):
        for seed in range(50):
            logits, p = random_instance(seed)
            curve = seen_unseen_curve(logits, p)
            assert np.all(np.diff(curve.points[:, 1]) >= 0)
            assert np.all(np.diff(curve.points[:, 0]) <= 0)
            assert curve.points[0].tolist() == [curve.within_group_acc[0], 0.0]
            assert curve.points[-1].tolist() == [0.0, curve.within_group_acc[1]]

    def test_matches_grid_evaluation_pointwise(self):
        # Compare at interval interiors; at the thresholds themselves the
        # reconstruction max_u + gamma can differ from max_s by one ulp.
        for seed in range(10):
            logits, p = random_instance(seed)
            curve = seen_unseen_curve(logits, p)
            t = curve.thresholds
            gammas = np.concatenate([[t[0] - 1.0], (t[:-1] + t[1:]) / 2.0, [t[-1] + 1.0]])
            gx, gy = grid_curve_points(logits.values, logits.labels, p, gammas)
            np.testing.assert_array_equal(gx, curve.points[:, 0])
            np.testing.assert_array_equal(gy, curve.points[:, 1])


class TestAusuc:
    def test_zero_when_absent_never_correct(self):
        logits = LabeledLogits([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]], [0, 2])
        assert ausuc(seen_unseen_curve(logits, LabelPartition(4, (0, 1)))) == 0.0

    def test_matches_dense_grid_oracle(self):
        for seed in range(10):
            logits, p = random_instance(seed, max_n=50)
            curve = seen_unseen_curve(logits, p)
            lo, hi = curve.thresholds[0] - 1.0, curve.thresholds[-1] + 1.0
            gammas = np.linspace(lo, hi, 20_001)
            gx, gy = grid_curve_points(logits.values, logits.labels, p, gammas)
            assert abs(ausuc(curve) - grid_area(gx, gy)) < 1e-3

    def test_shift_invariance_per_sample(self):
        # Dyadic logits and integer shifts keep the arithmetic exact, so
        # the areas must agree bit for bit.
        rng = np.random.default_rng(5)
        values = rng.integers(-64, 64, size=(40, 6)) / 16.0
        labels = np.concatenate([rng.integers(0, 3, 20), rng.integers(3, 6, 20)])
        p = LabelPartition(6, (0, 1, 2))
        before = ausuc(seen_unseen_curve(LabeledLogits(values, labels), p))
        shifted = values + rng.integers(-5, 6, size=(40, 1)).astype(float)
        after = ausuc(seen_unseen_curve(LabeledLogits(shifted, labels), p))
        assert before == after


class TestCurveCsv:
    def test_header_and_sentinel(self):
        logits = LabeledLogits([[3.0, 0.0, 0.5], [1.0, 0.0, 0.5]], [0, 2])
        text = format_curve_csv(seen_unseen_curve(logits, LabelPartition(3, (0, 1))))
        lines = text.strip().split("\n")
        assert lines[0] == "gamma_threshold,acc_s_y,acc_u_y"
        assert lines[1].startswith("-inf,")
        assert len(lines) == 4  # header + 3 intervals
