"""Post-hoc logit calibration: add a constant boost to every absent-class
logit at inference, and estimate that boost without absent-class data (ALG,
pseudo cross-validation) or with it (the cheating upper bound).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .analysis import nongt_logit_means
from .data import (
    LabeledFeatures,
    LabeledLogits,
    LabelPartition,
    LinearHead,
    check_width,
)
from .errors import EmptyGroupError, TrainingError, ValidationError
from .metrics import seen_unseen_curve
from .rng import derive_rng, derive_seed
from .trainer import MlpModel, TrainConfig, fine_tune, forward_batch

METHODS = ("ALG", "PCV", "STAR", "MANUAL")


@dataclass(frozen=True)
class GammaEstimate:
    """A calibration factor (in logit units) plus how it was obtained."""

    value: float
    method: str
    diagnostics: dict

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"method must be one of {METHODS}, got {self.method!r}")
        if not np.isfinite(self.value):
            raise ValidationError(f"gamma must be finite, got {self.value!r}")

    def as_dict(self) -> dict:
        out = {"method": self.method, "gamma": self.value}
        out.update(self.diagnostics)
        return out


def apply_gamma(logits: LabeledLogits, partition: LabelPartition, gamma: float) -> np.ndarray:
    """Predicted labels after boosting every absent-class logit by ``gamma``.

    Plain argmax of the adjusted logits; ties resolve to the lowest class
    index.
    """
    check_width(logits, partition)
    if not np.isfinite(gamma):
        raise ValidationError(f"gamma must be finite, got {gamma!r}")
    adjusted = logits.values + float(gamma) * partition.absent_column_mask()
    return np.argmax(adjusted, axis=1).astype(np.int64)


def estimate_gamma_alg(train_logits: LabeledLogits, partition: LabelPartition) -> GammaEstimate:
    """Average Logit Gap: mean difference between non-ground-truth seen
    logits and absent logits on the fine-tuning data.

    Every training label must belong to the fine-tuning classes, and there
    must be at least two of those (each sample needs a non-ground-truth
    seen logit).
    """
    check_width(train_logits, partition)
    seen = partition.group_indices("S")
    if seen.size < 2:
        raise ValidationError("ALG needs at least 2 fine-tuning classes")
    if not np.all(np.isin(train_logits.labels, seen)):
        raise ValidationError("ALG training data must be labeled within the fine-tuning classes")
    seen_means, absent_means = nongt_logit_means(train_logits, partition)
    # Difference of the two group means (not the mean of per-sample
    # differences) so the value matches the gap report bit for bit.
    value = float(seen_means.mean() - absent_means.mean())
    gaps = seen_means - absent_means
    gap_std = float(gaps.std(ddof=1)) if gaps.size > 1 else 0.0
    return GammaEstimate(
        value=value,
        method="ALG",
        diagnostics={"gap_mean": value, "gap_std": gap_std, "num_samples": int(gaps.size)},
    )


def estimate_gamma_star(test_logits: LabeledLogits, partition: LabelPartition) -> GammaEstimate:
    """Cheating calibration factor: the curve gamma maximizing overall
    accuracy on labeled test data.

    Candidates are the exact curve thresholds plus the beyond-the-last
    sentinel; ties prefer the larger min(Acc_{S/Y}, Acc_{U/Y}), then the
    smaller gamma.
    """
    curve = seen_unseen_curve(test_logits, partition)
    candidates = curve.candidate_gammas()
    overall = curve.acc_y_y()
    balance = np.minimum(curve.points[:, 0], curve.points[:, 1])
    best = 0
    for k in range(1, candidates.size):
        if overall[k] > overall[best] or (overall[k] == overall[best] and balance[k] > balance[best]):
            best = k
    return GammaEstimate(
        value=float(candidates[best]),
        method="STAR",
        diagnostics={
            "acc_y_y": float(overall[best]),
            "acc_s_y": float(curve.points[best, 0]),
            "acc_u_y": float(curve.points[best, 1]),
        },
    )


def predict_cosine(
    features: LabeledFeatures, head: LinearHead, partition: LabelPartition, gamma: float
) -> np.ndarray:
    """Calibrated prediction with cosine-similarity logits.

    Logits are the cosine similarities between feature rows and weight
    rows, which removes per-class weight-magnitude effects; the gamma rule
    then applies as usual.
    """
    if head.num_classes != partition.num_classes:
        raise ValidationError(
            f"head has {head.num_classes} classes but the partition has {partition.num_classes}"
        )
    if head.dim != features.dim:
        raise ValidationError(f"features have dim {features.dim}, head expects {head.dim}")
    if not np.isfinite(gamma):
        raise ValidationError(f"gamma must be finite, got {gamma!r}")
    feat_norms = np.linalg.norm(features.values, axis=1)
    zero = np.flatnonzero(feat_norms == 0.0)
    if zero.size:
        raise ValidationError(f"feature row {int(zero[0])} has zero norm")
    weight_norms = np.linalg.norm(head.weights, axis=1)
    zero = np.flatnonzero(weight_norms == 0.0)
    if zero.size:
        raise ValidationError(f"weight row {int(zero[0])} has zero norm")
    cosines = (features.values / feat_norms[:, None]) @ (head.weights / weight_norms[:, None]).T
    adjusted = cosines + float(gamma) * partition.absent_column_mask()
    return np.argmax(adjusted, axis=1).astype(np.int64)


def select_balanced_gamma(curve) -> tuple[float, float, float]:
    """Curve gamma minimizing |Acc_{S/Y} - Acc_{U/Y}|; ties take the
    smallest gamma. Returns (gamma, acc_seen, acc_absent) at the pick."""
    candidates = curve.candidate_gammas()
    gap = np.abs(curve.points[:, 0] - curve.points[:, 1])
    best = int(np.argmin(gap))  # first minimum = smallest gamma
    return (
        float(candidates[best]),
        float(curve.points[best, 0]),
        float(curve.points[best, 1]),
    )


def _stratified_split(labels: np.ndarray, classes, rng) -> tuple[np.ndarray, np.ndarray]:
    """Per-class 80/20 index split (at least one training sample per class)."""
    train_idx, val_idx = [], []
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            continue
        idx = idx[rng.permutation(idx.size)]
        n_train = max(1, int(np.ceil(0.8 * idx.size)))
        train_idx.append(idx[:n_train])
        val_idx.append(idx[n_train:])
    train = np.sort(np.concatenate(train_idx)) if train_idx else np.array([], dtype=np.int64)
    val = np.sort(np.concatenate(val_idx)) if val_idx else np.array([], dtype=np.int64)
    return train, val


def estimate_gamma_pcv(
    train_features: LabeledFeatures,
    pretrained: MlpModel,
    partition: LabelPartition,
    train_config: TrainConfig,
    repeats: int = 3,
    seed: int = 0,
    finetune_on_pseudo_absent: bool = False,
) -> GammaEstimate:
    """Pseudo cross-validation: simulate the seen/absent split inside the
    fine-tuning classes and pick the gamma balancing the two accuracies.

    Each repeat, with its own derived sub-seeds: (1) split the samples
    80/20 into pseudo-train and pseudo-validation, stratified per class;
    (2) randomly split the fine-tuning classes into pseudo-seen (half,
    rounded up) and pseudo-absent; (3) fine-tune a copy of the pre-trained
    model on the pseudo-seen portion of pseudo-train; (4) on
    pseudo-validation, with the label space restricted to the fine-tuning
    classes, pick the curve gamma minimizing the absolute accuracy gap
    between the pseudo groups (ties: smallest gamma). The estimate is the
    arithmetic mean of the per-repeat gammas.

    ``finetune_on_pseudo_absent`` flips which pseudo subset is fine-tuned
    while keeping the evaluation roles fixed, for replication studies of
    the swapped convention.
    """
    seen = partition.group_indices("S")
    if seen.size < 4:
        raise ValidationError("PCV needs at least 4 fine-tuning classes")
    if not isinstance(repeats, (int, np.integer)) or repeats < 1:
        raise ValidationError(f"repeats must be a positive integer, got {repeats!r}")
    if not np.all(np.isin(train_features.labels, seen)):
        raise ValidationError("PCV training data must be labeled within the fine-tuning classes")
    if train_features.dim != pretrained.dim_in:
        raise ValidationError(
            f"features have dim {train_features.dim}, model expects {pretrained.dim_in}"
        )
    if pretrained.num_classes != partition.num_classes:
        raise ValidationError(
            f"model has {pretrained.num_classes} classes but the partition has "
            f"{partition.num_classes}"
        )

    values, labels = train_features.values, train_features.labels
    position_of = {int(c): i for i, c in enumerate(seen)}
    gammas, acc_pseudo_seen, acc_pseudo_absent = [], [], []
    for r in range(int(repeats)):
        train_idx, val_idx = _stratified_split(labels, seen, derive_rng(seed, r, 0))
        if val_idx.size == 0:
            raise ValidationError(f"repeat {r}: pseudo-validation split is empty")
        order = derive_rng(seed, r, 1).permutation(seen.size)
        n_pseudo_seen = int(np.ceil(seen.size / 2))
        pseudo_seen = np.sort(seen[order[:n_pseudo_seen]])
        pseudo_absent = np.sort(seen[order[n_pseudo_seen:]])

        target = pseudo_absent if finetune_on_pseudo_absent else pseudo_seen
        rows = train_idx[np.isin(labels[train_idx], target)]
        if rows.size == 0:
            raise ValidationError(f"repeat {r}: no pseudo-training samples to fine-tune on")
        config = replace(train_config, seed=derive_seed(seed, r, 2))
        try:
            model_r, _ = fine_tune(
                pretrained, LabeledFeatures(values[rows], labels[rows]), target, config
            )
        except TrainingError as exc:
            raise TrainingError(f"repeat {r}: {exc}") from exc

        _, full_logits = forward_batch(model_r, values[val_idx])
        sub_logits = full_logits[:, seen]
        sub_labels = np.array([position_of[int(c)] for c in labels[val_idx]], dtype=np.int64)
        sub_partition = LabelPartition(
            int(seen.size), tuple(position_of[int(c)] for c in pseudo_seen)
        )
        try:
            curve = seen_unseen_curve(LabeledLogits(sub_logits, sub_labels), sub_partition)
        except EmptyGroupError as exc:
            raise EmptyGroupError(f"repeat {r}: {exc}") from exc
        gamma_r, acc_seen_r, acc_absent_r = select_balanced_gamma(curve)
        gammas.append(gamma_r)
        acc_pseudo_seen.append(acc_seen_r)
        acc_pseudo_absent.append(acc_absent_r)

    diagnostics = {"repeats": int(repeats)}
    for r in range(int(repeats)):
        diagnostics[f"gamma_{r}"] = gammas[r]
        diagnostics[f"acc_pseudo_seen_{r}"] = acc_pseudo_seen[r]
        diagnostics[f"acc_pseudo_absent_{r}"] = acc_pseudo_absent[r]
    return GammaEstimate(value=float(np.mean(gammas)), method="PCV", diagnostics=diagnostics)
