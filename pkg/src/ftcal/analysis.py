"""Weight-space and logit-space diagnostics for a fine-tuned classifier:
class-relationship similarity (linear CKA), update-direction similarity,
per-group weight norms, and absent-group logit statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledLogits, LabelPartition, LinearHead, check_width
from .errors import DegenerateInputError, EmptyGroupError, ValidationError

# Centered Grams of nearly identical rows have HSIC at rounding-noise level;
# anything at or below this is treated as "all rows identical".
_DEGENERATE_HSIC = 1e-24


@dataclass(frozen=True)
class SimilarityReport:
    """Pairwise cosine similarities over a class subset."""

    matrix: np.ndarray
    mean_offdiag: float
    subset: tuple[int, ...]


def _normalize_rows(matrix: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"{what} row {int(zero[0])} has zero norm")
    return matrix / norms[:, None]


def linear_cka(weights_a, weights_b) -> float:
    """Linear CKA between the Gram matrices of two row-normalized weight sets.

    With K = A_hat A_hat^T and L = B_hat B_hat^T (rows L2-normalized first),
    returns HSIC(K, L) / sqrt(HSIC(K, K) * HSIC(L, L)), where
    HSIC(K, L) = trace(K H L H) / (n - 1)^2 and H is the centering matrix
    I - 11^T / n. The value lies in [0, 1] up to rounding; higher means the
    pairwise class relationships are better preserved.
    """
    a = np.asarray(weights_a, dtype=np.float64)
    b = np.asarray(weights_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValidationError("weight matrices must be 2-D")
    if a.shape[0] != b.shape[0]:
        raise ValidationError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    n = a.shape[0]
    if n < 2:
        raise ValidationError("linear CKA needs at least 2 rows")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("weight matrices contain non-finite entries")

    a_hat = _normalize_rows(a, "weights_a")
    b_hat = _normalize_rows(b, "weights_b")
    gram_a = a_hat @ a_hat.T
    gram_b = b_hat @ b_hat.T
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    ka = centering @ gram_a @ centering
    kb = centering @ gram_b @ centering
    scale = (n - 1) ** 2
    hsic_ab = float((ka * kb).sum()) / scale
    hsic_aa = float((ka * ka).sum()) / scale
    hsic_bb = float((kb * kb).sum()) / scale
    if hsic_aa <= _DEGENERATE_HSIC or hsic_bb <= _DEGENERATE_HSIC:
        raise DegenerateInputError("all rows identical after normalization; CKA is undefined")
    return float(hsic_ab / np.sqrt(hsic_aa * hsic_bb))


def delta_w_similarity(w_pre: LinearHead, w_ft: LinearHead, subset) -> SimilarityReport:
    """Pairwise cosine similarity of per-class weight-update directions.

    Each class's update is the fine-tuned row minus the pre-trained row,
    L2-normalized per row before comparison.
    """
    if w_pre.weights.shape != w_ft.weights.shape:
        raise ValidationError(
            f"head shapes differ: {w_pre.weights.shape} vs {w_ft.weights.shape}"
        )
    classes = sorted(int(c) for c in subset)
    if len(classes) < 2:
        raise ValidationError("subset must contain at least 2 classes")
    if len(set(classes)) != len(classes):
        raise ValidationError("subset contains duplicate class indices")
    if classes[0] < 0 or classes[-1] >= w_pre.num_classes:
        raise ValidationError(f"subset indices must lie in [0, {w_pre.num_classes})")

    delta = w_ft.weights[classes] - w_pre.weights[classes]
    norms = np.linalg.norm(delta, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateInputError(f"class {classes[int(zero[0])]} has zero weight change")
    unit = delta / norms[:, None]
    matrix = unit @ unit.T
    m = len(classes)
    mean_offdiag = float((matrix.sum() - np.trace(matrix)) / (m * (m - 1)))
    return SimilarityReport(matrix=matrix, mean_offdiag=mean_offdiag, subset=tuple(classes))


def weight_norms(head: LinearHead, partition: LabelPartition) -> tuple[float, float]:
    """Mean L2 norm of the classifier rows, per group: (seen, absent)."""
    if head.num_classes != partition.num_classes:
        raise ValidationError(
            f"head has {head.num_classes} classes but the partition has "
            f"{partition.num_classes}"
        )
    norms = np.linalg.norm(head.weights, axis=1)
    return (
        float(norms[partition.group_indices("S")].mean()),
        float(norms[partition.group_indices("U")].mean()),
    )


def nongt_logit_means(logits: LabeledLogits, partition: LabelPartition):
    """Per-sample mean logit of each group, excluding the ground-truth
    column from its own group. Returns (seen_means, absent_means) arrays."""
    check_width(logits, partition)
    values, labels = logits.values, logits.labels
    seen_cols = partition.group_indices("S")
    absent_cols = partition.group_indices("U")
    in_seen = np.isin(labels, seen_cols)
    if in_seen.any() and seen_cols.size < 2:
        raise ValidationError("a seen-labeled sample has no non-ground-truth seen logit")
    if (~in_seen).any() and absent_cols.size < 2:
        raise ValidationError("an absent-labeled sample has no non-ground-truth absent logit")

    gt = values[np.arange(labels.size), labels]
    sum_seen = values[:, seen_cols].sum(axis=1)
    sum_absent = values[:, absent_cols].sum(axis=1)
    seen_means = np.where(
        in_seen, (sum_seen - gt) / (seen_cols.size - 1), sum_seen / seen_cols.size
    )
    absent_means = np.where(
        in_seen, sum_absent / absent_cols.size, (sum_absent - gt) / max(absent_cols.size - 1, 1)
    )
    return seen_means, absent_means


def logit_gap_stats(logits: LabeledLogits, partition: LabelPartition) -> tuple[float, float]:
    """Average non-ground-truth logit of each group over all samples.

    Returns (mean_nongt_seen, mean_nongt_absent); their difference on
    fine-tuning data is exactly the ALG calibration estimate.
    """
    seen_means, absent_means = nongt_logit_means(logits, partition)
    return float(seen_means.mean()), float(absent_means.mean())


def absent_binary_prob(logits: LabeledLogits, partition: LabelPartition) -> float:
    """Mean predicted probability that absent-labeled samples belong to the
    absent group (the group-level factor of the softmax decomposition)."""
    check_width(logits, partition)
    mask = partition.is_absent_label(logits.labels)
    if not mask.any():
        raise EmptyGroupError("no samples labeled in group U")
    rows = logits.values[mask]
    z = np.exp(rows - rows.max(axis=1, keepdims=True))
    z_seen = z[:, partition.group_indices("S")].sum(axis=1)
    z_absent = z[:, partition.group_indices("U")].sum(axis=1)
    return float((z_absent / (z_seen + z_absent)).mean())


def gt_vs_top_nongt_absent(logits: LabeledLogits, partition: LabelPartition) -> tuple[float, float]:
    """Over absent-labeled samples: mean ground-truth logit and mean of the
    largest absent logit excluding the ground truth."""
    check_width(logits, partition)
    absent_cols = partition.group_indices("U")
    if absent_cols.size < 2:
        raise ValidationError("needs at least 2 absent classes")
    mask = partition.is_absent_label(logits.labels)
    if not mask.any():
        raise EmptyGroupError("no samples labeled in group U")
    values = logits.values[mask][:, absent_cols]
    labels = logits.labels[mask]
    positions = np.searchsorted(absent_cols, labels)
    gt = values[np.arange(labels.size), positions]
    others = values.copy()
    others[np.arange(labels.size), positions] = -np.inf
    return float(gt.mean()), float(others.max(axis=1).mean())
