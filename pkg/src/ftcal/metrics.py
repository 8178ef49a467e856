"""Group-restricted accuracy, softmax decomposition, and the exact
seen-unseen trade-off curve with its area (AUSUC).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledLogits, LabelPartition, check_width
from .errors import EmptyGroupError, ValidationError


@dataclass(frozen=True)
class AccReport:
    """The five-accuracy family Acc_{A/B}: samples labeled in group A,
    classified by argmax restricted to label space B."""

    acc_y_y: float
    acc_s_y: float
    acc_u_y: float
    acc_s_s: float
    acc_u_u: float
    num_seen: int
    num_absent: int

    @property
    def num_total(self) -> int:
        return self.num_seen + self.num_absent

    def as_dict(self) -> dict:
        return {
            "acc_y_y": self.acc_y_y,
            "acc_s_y": self.acc_s_y,
            "acc_u_y": self.acc_u_y,
            "acc_s_s": self.acc_s_s,
            "acc_u_u": self.acc_u_u,
            "count_s": self.num_seen,
            "count_u": self.num_absent,
            "count_y": self.num_total,
        }


@dataclass(frozen=True)
class SeenUnseenCurve:
    """Exact staircase of (Acc_{S/Y}, Acc_{U/Y}) over all calibration factors.

    ``thresholds`` holds the strictly increasing gamma values at which at
    least one sample's predicted group flips. ``points[k]`` is the accuracy
    pair on the interval (thresholds[k-1], thresholds[k]]; points[0] covers
    (-inf, thresholds[0]] and points[-1] covers (thresholds[-1], +inf).
    A sample is predicted absent iff max absent logit + gamma strictly
    exceeds max seen logit (ties keep the seen group), which makes each
    interval's accuracies constant.
    """

    thresholds: np.ndarray
    points: np.ndarray
    within_group_acc: tuple[float, float]
    num_seen: int
    num_absent: int

    def __post_init__(self):
        self.thresholds.flags.writeable = False
        self.points.flags.writeable = False

    def candidate_gammas(self) -> np.ndarray:
        """One gamma realizing each staircase point, in interval order.

        points[k] is attained at thresholds[k] for k < K; the final
        all-absent point needs any gamma beyond the largest threshold, for
        which thresholds[-1] + 1 serves as the sentinel.
        """
        return np.append(self.thresholds, self.thresholds[-1] + 1.0)

    def acc_y_y(self) -> np.ndarray:
        """Overall accuracy at each staircase point."""
        n_s, n_u = self.num_seen, self.num_absent
        return (n_s * self.points[:, 0] + n_u * self.points[:, 1]) / (n_s + n_u)


def _restriction_columns(restriction, num_classes: int) -> np.ndarray:
    cols = np.unique(np.asarray(list(restriction), dtype=np.int64))
    if cols.size == 0:
        raise ValidationError("restriction must be a nonempty set of class indices")
    if cols.min() < 0 or cols.max() >= num_classes:
        raise ValidationError(f"restriction indices must lie in [0, {num_classes})")
    return cols


def _argmax_restricted(values: np.ndarray, cols: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, so ascending columns give the
    # lowest-class-index tie rule.
    return cols[np.argmax(values[:, cols], axis=1)]


def predict_restricted(logits: LabeledLogits, restriction) -> np.ndarray:
    """Per-row argmax over the columns in ``restriction``; ties resolve to
    the lowest class index."""
    cols = _restriction_columns(restriction, logits.num_classes)
    return _argmax_restricted(logits.values, cols)


def accuracy(logits: LabeledLogits, partition: LabelPartition, group_a: str, group_b: str) -> float:
    """Acc_{A/B}: fraction of A-labeled samples whose argmax restricted to
    group B equals their label."""
    check_width(logits, partition)
    a_classes = partition.group_indices(group_a)
    b_cols = partition.group_indices(group_b)
    mask = np.isin(logits.labels, a_classes)
    if not mask.any():
        raise EmptyGroupError(f"no samples labeled in group {group_a}")
    preds = _argmax_restricted(logits.values[mask], b_cols)
    return float(np.mean(preds == logits.labels[mask]))


def acc_report(logits: LabeledLogits, partition: LabelPartition, gamma: float = 0.0) -> AccReport:
    """All five Acc_{A/B} values, optionally after adding ``gamma`` to every
    absent-class logit. Requires samples from both groups."""
    check_width(logits, partition)
    if not np.isfinite(gamma):
        raise ValidationError(f"gamma must be finite, got {gamma!r}")
    adjusted = LabeledLogits(
        logits.values + float(gamma) * partition.absent_column_mask(), logits.labels
    )
    num_seen = int(np.isin(logits.labels, partition.group_indices("S")).sum())
    num_absent = logits.num_samples - num_seen
    return AccReport(
        acc_y_y=accuracy(adjusted, partition, "Y", "Y"),
        acc_s_y=accuracy(adjusted, partition, "S", "Y"),
        acc_u_y=accuracy(adjusted, partition, "U", "Y"),
        acc_s_s=accuracy(adjusted, partition, "S", "S"),
        acc_u_u=accuracy(adjusted, partition, "U", "U"),
        num_seen=num_seen,
        num_absent=num_absent,
    )


def decompose(logit_row, partition: LabelPartition):
    """Split one row's softmax into the absent-mass and within-group parts.

    Returns ``(p_absent, within_seen, within_absent)`` where ``p_absent`` is
    the total softmax probability of the absent group and the within-group
    vectors are the renormalized softmax over each group (ordered by
    ascending class index). For any class c the full softmax factorizes as
    p_absent * within_absent[c] (c absent) or
    (1 - p_absent) * within_seen[c] (c seen).

    Exponentials are max-shifted, which leaves every ratio unchanged while
    preventing overflow.
    """
    row = np.asarray(logit_row, dtype=np.float64).reshape(-1)
    if row.shape[0] != partition.num_classes:
        raise ValidationError(
            f"logit row has {row.shape[0]} entries but the partition has "
            f"{partition.num_classes} classes"
        )
    if not np.all(np.isfinite(row)):
        raise ValidationError("logit row contains non-finite entries")
    z = np.exp(row - row.max())
    seen = partition.group_indices("S")
    absent = partition.group_indices("U")
    z_seen = float(z[seen].sum())
    z_absent = float(z[absent].sum())
    p_absent = z_absent / (z_seen + z_absent)
    return p_absent, z[seen] / z_seen, z[absent] / z_absent


def seen_unseen_curve(logits: LabeledLogits, partition: LabelPartition) -> SeenUnseenCurve:
    """Exact accuracy staircase over every calibration factor.

    For each sample the predicted group flips exactly once, at
    gamma = (max seen logit) - (max absent logit); within-group correctness
    does not depend on gamma. Sorting the per-sample flip values therefore
    yields the full curve without any grid.
    """
    check_width(logits, partition)
    values, labels = logits.values, logits.labels
    seen_cols = partition.group_indices("S")
    absent_cols = partition.group_indices("U")
    is_absent = partition.is_absent_label(labels)
    num_absent = int(is_absent.sum())
    num_seen = labels.size - num_absent
    if num_seen == 0:
        raise EmptyGroupError("no samples labeled in group S")
    if num_absent == 0:
        raise EmptyGroupError("no samples labeled in group U")

    flip = values[:, seen_cols].max(axis=1) - values[:, absent_cols].max(axis=1)
    correct_seen = (~is_absent) & (_argmax_restricted(values, seen_cols) == labels)
    correct_absent = is_absent & (_argmax_restricted(values, absent_cols) == labels)

    thresholds = np.unique(flip)
    k = thresholds.size
    # interval index of each sample's flip; the sample is predicted seen on
    # intervals 0..j and absent on intervals j+1..k
    j = np.searchsorted(thresholds, flip)
    hist_seen = np.bincount(j[correct_seen], minlength=k)
    hist_absent = np.bincount(j[correct_absent], minlength=k)
    seen_counts = np.concatenate([np.cumsum(hist_seen[::-1])[::-1], [0]])
    absent_counts = np.concatenate([[0], np.cumsum(hist_absent)])
    points = np.stack([seen_counts / num_seen, absent_counts / num_absent], axis=1)
    within = (
        float(correct_seen.sum() / num_seen),
        float(correct_absent.sum() / num_absent),
    )
    return SeenUnseenCurve(
        thresholds=thresholds,
        points=points,
        within_group_acc=within,
        num_seen=num_seen,
        num_absent=num_absent,
    )


def ausuc(curve: SeenUnseenCurve) -> float:
    """Area under the staircase of achievable accuracy pairs.

    Computed as the area of the region dominated by at least one achievable
    point (union of rectangles), by rectangle summation over the sorted
    staircase; both accuracies live in [0, 1], so the result does too.
    """
    x = curve.points[:, 0]
    y = curve.points[:, 1]
    width = x - np.append(x[1:], 0.0)
    return float(np.sum(y * width))


def format_curve_csv(curve: SeenUnseenCurve) -> str:
    """Curve as CSV, one row per staircase interval.

    The row's first field is the interval's left endpoint (``-inf`` for the
    first interval).
    """
    lines = ["gamma_threshold,acc_s_y,acc_u_y"]
    left = ["-inf"] + [f"{t:.17g}" for t in curve.thresholds]
    for bound, (acc_s, acc_u) in zip(left, curve.points):
        lines.append(f"{bound},{acc_s:.17g},{acc_u:.17g}")
    return "\n".join(lines) + "\n"
