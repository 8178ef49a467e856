"""Label-space partition and the labeled matrix containers used everywhere.

Class indices are 0-based. All real values are float64. Every container is
immutable after construction (arrays are copied and marked read-only), so
instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import derive_rng

_GROUPS = ("S", "U", "Y")


def _frozen_array(values, dtype, name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.ndim != ndim:
        raise ValidationError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class LabelPartition:
    """Total label space {0..num_classes-1} split into fine-tuning classes
    (the "seen" group S) and the complementary absent classes (group U).

    The fine-tuning set must be a nonempty strict subset, so both groups are
    always nonempty.
    """

    num_classes: int
    fine_tuning: tuple[int, ...]

    def __post_init__(self):
        if not isinstance(self.num_classes, (int, np.integer)) or self.num_classes < 2:
            raise ValidationError(f"num_classes must be an integer >= 2, got {self.num_classes!r}")
        object.__setattr__(self, "num_classes", int(self.num_classes))
        try:
            indices = sorted(int(c) for c in self.fine_tuning)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"fine_tuning must be a collection of integers: {exc}") from exc
        if len(set(indices)) != len(indices):
            raise ValidationError("fine_tuning contains duplicate class indices")
        if any(c < 0 or c >= self.num_classes for c in indices):
            raise ValidationError(
                f"fine_tuning indices must lie in [0, {self.num_classes}), got {indices}"
            )
        if not 0 < len(indices) < self.num_classes:
            raise ValidationError(
                "fine_tuning must be a nonempty strict subset of the label space "
                f"(got {len(indices)} of {self.num_classes} classes)"
            )
        object.__setattr__(self, "fine_tuning", tuple(indices))

    @property
    def absent(self) -> tuple[int, ...]:
        seen = set(self.fine_tuning)
        return tuple(c for c in range(self.num_classes) if c not in seen)

    def group_indices(self, selector: str) -> np.ndarray:
        """Class indices of group ``selector`` in {"S", "U", "Y"}, ascending."""
        if selector not in _GROUPS:
            raise ValidationError(f"group selector must be one of {_GROUPS}, got {selector!r}")
        if selector == "S":
            return np.array(self.fine_tuning, dtype=np.int64)
        if selector == "U":
            return np.array(self.absent, dtype=np.int64)
        return np.arange(self.num_classes, dtype=np.int64)

    def absent_column_mask(self) -> np.ndarray:
        """Float64 vector with 1.0 at absent-class columns, 0.0 elsewhere."""
        mask = np.zeros(self.num_classes, dtype=np.float64)
        mask[list(self.absent)] = 1.0
        return mask

    def is_absent_label(self, labels: np.ndarray) -> np.ndarray:
        return np.isin(labels, self.group_indices("U"))


@dataclass(frozen=True)
class LabeledLogits:
    """N x C matrix of decision values plus N ground-truth labels."""

    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, np.float64, "logits", ndim=2)
        labels = _frozen_array(self.labels, np.int64, "labels", ndim=1)
        if values.shape[0] < 1:
            raise ValidationError("logits must contain at least one sample")
        if values.shape[0] != labels.shape[0]:
            raise ValidationError(
                f"row count {values.shape[0]} does not match label count {labels.shape[0]}"
            )
        _check_finite(values, "logits")
        if labels.size and (labels.min() < 0 or labels.max() >= values.shape[1]):
            raise ValidationError(f"labels must lie in [0, {values.shape[1]})")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LabeledFeatures:
    """N x d feature matrix plus N labels."""

    values: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        values = _frozen_array(self.values, np.float64, "features", ndim=2)
        labels = _frozen_array(self.labels, np.int64, "labels", ndim=1)
        if values.shape[0] < 1:
            raise ValidationError("features must contain at least one sample")
        if values.shape[0] != labels.shape[0]:
            raise ValidationError(
                f"row count {values.shape[0]} does not match label count {labels.shape[0]}"
            )
        _check_finite(values, "features")
        if labels.size and labels.min() < 0:
            raise ValidationError("labels must be nonnegative")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class LinearHead:
    """Bias-free linear classifier: row c holds the weight vector of class c."""

    weights: np.ndarray

    def __post_init__(self):
        weights = _frozen_array(self.weights, np.float64, "weights", ndim=2)
        if weights.shape[0] < 2:
            raise ValidationError("a linear head needs at least 2 classes")
        if weights.shape[1] < 1:
            raise ValidationError("a linear head needs at least 1 feature dimension")
        _check_finite(weights, "weights")
        object.__setattr__(self, "weights", weights)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def check_width(logits: LabeledLogits, partition: LabelPartition) -> None:
    """Raise unless the logits' class dimension matches the partition."""
    if logits.num_classes != partition.num_classes:
        raise ValidationError(
            f"logits have {logits.num_classes} classes but the partition has "
            f"{partition.num_classes}"
        )


def make_random_split(num_classes: int, k: int, seed: int) -> LabelPartition:
    """Uniformly random k-subset of classes as the fine-tuning set.

    Deterministic given ``seed``: the subset is the first k entries of a
    Philox-generated permutation of the label space.
    """
    if not isinstance(num_classes, (int, np.integer)) or num_classes < 2:
        raise ValidationError(f"num_classes must be an integer >= 2, got {num_classes!r}")
    if not isinstance(k, (int, np.integer)) or not 1 <= k < num_classes:
        raise ValidationError(f"k must satisfy 1 <= k < num_classes, got k={k!r}")
    rng = derive_rng(seed)
    chosen = np.sort(rng.permutation(int(num_classes))[: int(k)])
    return LabelPartition(int(num_classes), tuple(int(c) for c in chosen))


def make_greedy_similar_split(class_means, k: int) -> LabelPartition:
    """Greedily pick k classes that cluster tightly in feature space.

    The fine-tuning set starts from the pair of classes with the smallest
    Euclidean distance between their means and grows one class at a time,
    always adding the class that minimizes the resulting total intra-group
    pairwise distance. Ties resolve to the smallest class index; k = 1
    degenerates to class 0 (every singleton has zero intra-group distance).
    """
    means = np.asarray(class_means, dtype=np.float64)
    if means.ndim != 2:
        raise ValidationError(f"class_means must be a 2-D matrix, got shape {means.shape}")
    _check_finite(means, "class_means")
    num_classes = means.shape[0]
    if num_classes < 2:
        raise ValidationError("class_means must contain at least 2 classes")
    if not isinstance(k, (int, np.integer)) or not 1 <= k < num_classes:
        raise ValidationError(f"k must satisfy 1 <= k < num_classes, got k={k!r}")
    k = int(k)
    if k == 1:
        return LabelPartition(num_classes, (0,))

    diff = means[:, None, :] - means[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    rows, cols = np.triu_indices(num_classes, k=1)
    best = int(np.argmin(dist[rows, cols]))  # first minimum = lexicographically smallest pair
    members = [int(rows[best]), int(cols[best])]
    while len(members) < k:
        candidates = np.array([c for c in range(num_classes) if c not in members])
        added_cost = dist[np.ix_(candidates, members)].sum(axis=1)
        members.append(int(candidates[int(np.argmin(added_cost))]))
    return LabelPartition(num_classes, tuple(sorted(members)))


def total_intra_group_distance(class_means, subset) -> float:
    """Sum of pairwise Euclidean distances between the means of ``subset``."""
    means = np.asarray(class_means, dtype=np.float64)
    idx = sorted(int(c) for c in subset)
    total = 0.0
    for a in range(len(idx)):
        for b in range(a + 1, len(idx)):
            total += float(np.linalg.norm(means[idx[a]] - means[idx[b]]))
    return total
