"""Nearest Class Mean classification over L2-normalized features.

NCM depends only on the feature geometry, never on the linear head, which
makes it a clean probe of feature quality. Means are computed from
normalized features and deliberately not re-normalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledFeatures
from .errors import MissingClassError, ValidationError


@dataclass(frozen=True)
class ClassMeans:
    """Arithmetic means of unit-normalized feature rows, one per class."""

    means: np.ndarray
    class_ids: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64)
        class_ids = np.array(self.class_ids, dtype=np.int64)
        counts = np.array(self.counts, dtype=np.int64)
        if means.ndim != 2 or class_ids.ndim != 1 or counts.ndim != 1:
            raise ValidationError("means must be 2-D with 1-D class_ids and counts")
        if not (means.shape[0] == class_ids.shape[0] == counts.shape[0]):
            raise ValidationError("means, class_ids and counts must agree in length")
        if class_ids.size == 0:
            raise ValidationError("at least one class is required")
        if np.any(np.diff(class_ids) <= 0):
            raise ValidationError("class_ids must be strictly increasing")
        if counts.min() < 1:
            raise ValidationError("every class needs at least one sample")
        for arr in (means, class_ids, counts):
            arr.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "class_ids", class_ids)
        object.__setattr__(self, "counts", counts)


def _unit_rows(features: LabeledFeatures) -> np.ndarray:
    norms = np.linalg.norm(features.values, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"feature row {int(zero[0])} has zero norm")
    return features.values / norms[:, None]


def class_means(features: LabeledFeatures, classes) -> ClassMeans:
    """Mean of the unit-normalized feature rows of each requested class."""
    ids = sorted({int(c) for c in classes})
    if not ids:
        raise ValidationError("classes must be nonempty")
    unit = _unit_rows(features)
    means, counts = [], []
    for c in ids:
        rows = np.flatnonzero(features.labels == c)
        if rows.size == 0:
            raise MissingClassError(f"class {c} has no samples")
        means.append(unit[rows].mean(axis=0))
        counts.append(int(rows.size))
    return ClassMeans(
        means=np.vstack(means),
        class_ids=np.array(ids, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64),
    )


def ncm_predict(features: LabeledFeatures, means: ClassMeans, restriction) -> np.ndarray:
    """Per-row nearest class mean in Euclidean distance, restricted to
    ``restriction``; ties resolve to the lowest class index.

    Features are unit-normalized before the distance computation, so
    positively rescaling a row never changes its prediction.
    """
    wanted = sorted({int(c) for c in restriction})
    if not wanted:
        raise ValidationError("restriction must be nonempty")
    known = set(int(c) for c in means.class_ids)
    missing = [c for c in wanted if c not in known]
    if missing:
        raise MissingClassError(f"no class mean available for class {missing[0]}")
    if features.dim != means.means.shape[1]:
        raise ValidationError(
            f"features have dim {features.dim}, means have dim {means.means.shape[1]}"
        )
    unit = _unit_rows(features)
    positions = np.searchsorted(means.class_ids, np.array(wanted, dtype=np.int64))
    candidates = means.means[positions]
    diff = unit[:, None, :] - candidates[None, :, :]
    sq_dist = (diff * diff).sum(axis=2)
    winners = np.argmin(sq_dist, axis=1)  # first minimum = lowest class index
    return np.array(wanted, dtype=np.int64)[winners]
