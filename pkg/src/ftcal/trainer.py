"""Two-layer linear classifier with analytic softmax cross-entropy
gradients, a deterministic SGD fine-tuning loop with freezable parts, the
2-D Gaussian toy-data generator, and the closed-form predictor of how one
update moves the hidden features of an input the batch never contained.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import LabeledFeatures, LinearHead
from .errors import TrainingError, ValidationError
from .rng import check_seed, derive_rng

ACTIVATIONS = ("linear", "rectified")
MODES = ("full", "frozen_classifier", "linear_probe")


@dataclass(frozen=True)
class MlpModel:
    """hidden = activation(hidden_map @ x); logits = head @ hidden."""

    hidden_map: np.ndarray
    head: LinearHead
    activation: str = "linear"

    def __post_init__(self):
        hidden_map = np.array(self.hidden_map, dtype=np.float64)
        if hidden_map.ndim != 2:
            raise ValidationError(f"hidden_map must be 2-D, got shape {hidden_map.shape}")
        if not np.all(np.isfinite(hidden_map)):
            raise ValidationError("hidden_map contains non-finite entries")
        if self.head.dim != hidden_map.shape[0]:
            raise ValidationError(
                f"head expects {self.head.dim} hidden features but hidden_map "
                f"produces {hidden_map.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"activation must be one of {ACTIVATIONS}")
        hidden_map.flags.writeable = False
        object.__setattr__(self, "hidden_map", hidden_map)

    @property
    def dim_in(self) -> int:
        return self.hidden_map.shape[1]

    @property
    def dim_hidden(self) -> int:
        return self.hidden_map.shape[0]

    @property
    def num_classes(self) -> int:
        return self.head.num_classes


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings; ``mode`` picks which parameter blocks get updated."""

    learning_rate: float
    momentum: float = 0.0
    weight_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    mode: str = "full"
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.learning_rate) or self.learning_rate < 0:
            raise ValidationError(f"learning_rate must be >= 0, got {self.learning_rate!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError(f"momentum must lie in [0, 1), got {self.momentum!r}")
        if not np.isfinite(self.weight_decay) or self.weight_decay < 0:
            raise ValidationError(f"weight_decay must be >= 0, got {self.weight_decay!r}")
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 1:
            raise ValidationError(f"epochs must be a positive integer, got {self.epochs!r}")
        if not isinstance(self.batch_size, (int, np.integer)) or self.batch_size < 1:
            raise ValidationError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        check_seed(self.seed)

    def as_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "mode": self.mode,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float


@dataclass(frozen=True)
class ToySpec:
    """Generator settings for the 2-D Gaussian toy experiment.

    The pre-training domain draws each class around its mean; the target
    domain shifts each class mean horizontally by its entry of ``shift``.
    All coordinates are clamped to be nonnegative.
    """

    class_means: tuple = ((10.0, 2.0), (10.0, 3.0), (10.0, 8.0), (10.0, 7.0))
    stddev: float = 0.2
    shift: tuple = (1.0, -1.0, -1.0, 1.0)
    samples_per_class: int = 200
    fine_tuning: tuple = (0, 1)

    def __post_init__(self):
        means = tuple(tuple(float(v) for v in m) for m in self.class_means)
        if len(means) < 2 or any(len(m) != 2 for m in means):
            raise ValidationError("class_means must hold at least two 2-D points")
        if not np.isfinite(self.stddev) or self.stddev < 0:
            raise ValidationError(f"stddev must be >= 0, got {self.stddev!r}")
        shift = tuple(float(s) for s in self.shift)
        if len(shift) != len(means):
            raise ValidationError("shift must provide one horizontal offset per class")
        if self.samples_per_class < 1:
            raise ValidationError("samples_per_class must be positive")
        ft = tuple(sorted(int(c) for c in self.fine_tuning))
        if not 0 < len(ft) < len(means) or len(set(ft)) != len(ft):
            raise ValidationError("fine_tuning must be a nonempty strict subset of the classes")
        if ft[0] < 0 or ft[-1] >= len(means):
            raise ValidationError("fine_tuning indices out of range")
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "samples_per_class", int(self.samples_per_class))
        object.__setattr__(self, "fine_tuning", ft)

    @property
    def num_classes(self) -> int:
        return len(self.class_means)


def _activate(pre: np.ndarray, activation: str) -> np.ndarray:
    return pre if activation == "linear" else np.maximum(pre, 0.0)


def forward(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Hidden features and logits for a single input vector."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != model.dim_in:
        raise ValidationError(f"input has {x.shape[0]} entries, model expects {model.dim_in}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("input contains non-finite entries")
    hidden = _activate(model.hidden_map @ x, model.activation)
    return hidden, model.head.weights @ hidden


def forward_batch(model: MlpModel, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Hidden features and logits for an N x d_in input matrix."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != model.dim_in:
        raise ValidationError(f"inputs must have shape (N, {model.dim_in}), got {inputs.shape}")
    hidden = _activate(inputs @ model.hidden_map.T, model.activation)
    return hidden, hidden @ model.head.weights.T


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def loss_and_grads(model: MlpModel, x, y: int):
    """Cross-entropy loss and its analytic gradients for one sample.

    The head gradient row c is (p_c - [y = c]) * hidden; the hidden-map
    gradient is the outer product of the back-propagated error
    head^T (p - onehot_y), gated by the activation derivative, with x.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not isinstance(y, (int, np.integer)) or not 0 <= int(y) < model.num_classes:
        raise ValidationError(f"label must lie in [0, {model.num_classes}), got {y!r}")
    y = int(y)
    if x.shape[0] != model.dim_in:
        raise ValidationError(f"input has {x.shape[0]} entries, model expects {model.dim_in}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("input contains non-finite entries")

    pre = model.hidden_map @ x
    hidden = _activate(pre, model.activation)
    logits = model.head.weights @ hidden
    shift = logits.max()
    logsumexp = shift + np.log(np.exp(logits - shift).sum())
    loss = float(logsumexp - logits[y])
    err = _softmax(logits)
    err[y] -= 1.0
    grad_head = np.outer(err, hidden)
    delta = model.head.weights.T @ err
    if model.activation == "rectified":
        delta = delta * (pre > 0.0)
    grad_hidden_map = np.outer(delta, x)
    return loss, grad_head, grad_hidden_map


def _batch_loss_grads(hidden_map, head_weights, activation, inputs, labels):
    """Mean loss and mean gradients over a batch."""
    pre = inputs @ hidden_map.T
    hidden = _activate(pre, activation)
    logits = hidden @ head_weights.T
    shift = logits.max(axis=1, keepdims=True)
    z = np.exp(logits - shift)
    z_sum = z.sum(axis=1)
    n = inputs.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(np.log(z_sum) + shift[:, 0] - logits[rows, labels]))
    err = z / z_sum[:, None]
    err[rows, labels] -= 1.0
    err /= n
    grad_head = err.T @ hidden
    delta = err @ head_weights
    if activation == "rectified":
        delta = delta * (pre > 0.0)
    grad_hidden_map = delta.T @ inputs
    return loss, grad_head, grad_hidden_map


def _mean_loss_and_accuracy(hidden_map, head_weights, activation, inputs, labels):
    hidden = _activate(inputs @ hidden_map.T, activation)
    logits = hidden @ head_weights.T
    shift = logits.max(axis=1, keepdims=True)
    z_sum = np.exp(logits - shift).sum(axis=1)
    rows = np.arange(inputs.shape[0])
    loss = float(np.mean(np.log(z_sum) + shift[:, 0] - logits[rows, labels]))
    acc = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss, acc


def fine_tune(
    model: MlpModel,
    data: LabeledFeatures,
    allowed_classes,
    config: TrainConfig,
) -> tuple[MlpModel, list[EpochRecord]]:
    """Mini-batch SGD with momentum and decoupled weight decay.

    The loss is the full softmax cross-entropy over all classes, so classes
    outside ``allowed_classes`` only ever receive negative pressure. Mode
    ``full`` updates both matrices, ``frozen_classifier`` only the hidden
    map, ``linear_probe`` only the head; frozen matrices come back bitwise
    unchanged. Each epoch's shuffle derives from ``config.seed`` and the
    epoch index, so results are reproducible and order-independent. The
    history records end-of-epoch loss and accuracy on the training data.
    """
    allowed = np.unique(np.asarray(list(allowed_classes), dtype=np.int64))
    if allowed.size == 0 or allowed.min() < 0 or allowed.max() >= model.num_classes:
        raise ValidationError(f"allowed_classes must be a nonempty subset of [0, {model.num_classes})")
    if not np.all(np.isin(data.labels, allowed)):
        raise ValidationError("training data contains labels outside allowed_classes")
    if data.dim != model.dim_in:
        raise ValidationError(f"data has {data.dim} features, model expects {model.dim_in}")

    hidden_map = model.hidden_map.copy()
    head_weights = model.head.weights.copy()
    vel_hidden = np.zeros_like(hidden_map)
    vel_head = np.zeros_like(head_weights)
    update_hidden = config.mode in ("full", "frozen_classifier")
    update_head = config.mode in ("full", "linear_probe")
    inputs, labels = data.values, data.labels
    n = data.num_samples
    lr, mu, wd = config.learning_rate, config.momentum, config.weight_decay

    history: list[EpochRecord] = []
    for epoch in range(config.epochs):
        order = derive_rng(config.seed, epoch).permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grad_head, grad_hidden = _batch_loss_grads(
                hidden_map, head_weights, model.activation, inputs[batch], labels[batch]
            )
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            if update_hidden:
                vel_hidden = mu * vel_hidden + grad_hidden
                hidden_map = hidden_map - lr * vel_hidden - lr * wd * hidden_map
            if update_head:
                vel_head = mu * vel_head + grad_head
                head_weights = head_weights - lr * vel_head - lr * wd * head_weights
        loss, acc = _mean_loss_and_accuracy(
            hidden_map, head_weights, model.activation, inputs, labels
        )
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        history.append(EpochRecord(epoch=epoch, loss=loss, accuracy=acc))

    trained = MlpModel(
        hidden_map=hidden_map, head=LinearHead(head_weights), activation=model.activation
    )
    return trained, history


def gradient_check(num_cases: int = 100, step: float = 1e-5, seed: int = 0) -> float:
    """Worst disagreement between analytic and central-difference gradients.

    Random small models and inputs; both activations are exercised. Each
    case's error is the max absolute difference scaled by the larger
    gradient magnitude (floored at 1 so near-zero gradients are compared
    absolutely). Rectified cases resample until every pre-activation is
    well clear of the kink.
    """
    rng = derive_rng(seed)
    worst = 0.0
    for case in range(num_cases):
        dim_in = int(rng.integers(2, 7))
        dim_hidden = int(rng.integers(2, 6))
        num_classes = int(rng.integers(2, 7))
        activation = ACTIVATIONS[case % 2]
        hidden_map = rng.normal(0.0, 0.7, size=(dim_hidden, dim_in))
        head = rng.normal(0.0, 0.7, size=(num_classes, dim_hidden))
        x = rng.normal(0.0, 1.0, size=dim_in)
        if activation == "rectified":
            while np.abs(hidden_map @ x).min() < 1e-3:
                x = rng.normal(0.0, 1.0, size=dim_in)
        y = int(rng.integers(num_classes))
        model = MlpModel(hidden_map=hidden_map, head=LinearHead(head), activation=activation)
        _, grad_head, grad_hidden = loss_and_grads(model, x, y)

        def loss_at(hm, hw):
            probe = MlpModel(hidden_map=hm, head=LinearHead(hw), activation=activation)
            return loss_and_grads(probe, x, y)[0]

        for analytic, matrix, is_head in ((grad_head, head, True), (grad_hidden, hidden_map, False)):
            numeric = np.zeros_like(matrix)
            for idx in np.ndindex(matrix.shape):
                bumped = matrix.copy()
                bumped[idx] = matrix[idx] + step
                up = loss_at(hidden_map, bumped) if is_head else loss_at(bumped, head)
                bumped[idx] = matrix[idx] - step
                down = loss_at(hidden_map, bumped) if is_head else loss_at(bumped, head)
                numeric[idx] = (up - down) / (2.0 * step)
            scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1.0)
            worst = max(worst, float(np.abs(analytic - numeric).max() / scale))
    return worst


def gen_toy_data(spec: ToySpec, seed: int) -> tuple[LabeledFeatures, LabeledFeatures]:
    """Draw the pre-training and horizontally shifted target domains.

    Per-class Gaussians with isotropic ``spec.stddev``; target means are the
    pre-training means moved by ``spec.shift`` along the first coordinate.
    Coordinates are clamped at zero.
    """
    rng_pre = derive_rng(seed, 0)
    rng_target = derive_rng(seed, 1)
    n = spec.samples_per_class

    def draw(rng, means):
        blocks, labels = [], []
        for c, mean in enumerate(means):
            samples = np.asarray(mean) + spec.stddev * rng.standard_normal((n, 2))
            blocks.append(np.maximum(samples, 0.0))
            labels.append(np.full(n, c, dtype=np.int64))
        return LabeledFeatures(np.vstack(blocks), np.concatenate(labels))

    target_means = [(mx + dx, my) for (mx, my), dx in zip(spec.class_means, spec.shift)]
    return draw(rng_pre, spec.class_means), draw(rng_target, target_means)


def absent_feature_shift(model: MlpModel, seen_example, absent_input, learning_rate: float):
    """Predicted vs. actual hidden-feature change of ``absent_input`` after
    one plain SGD step on ``seen_example``.

    The closed form, valid only for the linear activation, is
    -lr * sum_j (p_j - [j = y]) w_j (x . x'): the update is proportional to
    the input similarity x . x', so orthogonal inputs do not move at all.
    The actual change applies the analytic hidden-map gradient (momentum
    and weight decay are outside this contract).
    """
    if model.activation != "linear":
        raise ValidationError("the closed-form feature shift requires the linear activation")
    if not np.isfinite(learning_rate):
        raise ValidationError(f"learning_rate must be finite, got {learning_rate!r}")
    x, y = seen_example
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    other = np.asarray(absent_input, dtype=np.float64).reshape(-1)
    if other.shape[0] != model.dim_in:
        raise ValidationError(f"absent_input has {other.shape[0]} entries, model expects {model.dim_in}")
    if not np.all(np.isfinite(other)):
        raise ValidationError("absent_input contains non-finite entries")

    _, logits = forward(model, x)
    err = _softmax(logits)
    err[int(y)] -= 1.0
    predicted = -learning_rate * (model.head.weights.T @ err) * float(x @ other)

    _, _, grad_hidden = loss_and_grads(model, x, int(y))
    updated = model.hidden_map - learning_rate * grad_hidden
    actual = updated @ other - model.hidden_map @ other
    return predicted, actual


def default_train_config(seed: int = 0, mode: str = "full") -> TrainConfig:
    """The toy experiment's SGD settings: lr 0.01 for 100 epochs."""
    return TrainConfig(
        learning_rate=0.01,
        momentum=0.0,
        weight_decay=0.0,
        epochs=100,
        batch_size=32,
        mode=mode,
        seed=seed,
    )


def pretrain_config(config: TrainConfig, seed: int) -> TrainConfig:
    """Pre-training variant of ``config``: both layers trained (``mode`` in
    the config only governs the fine-tuning phase), same optimizer
    settings, derived seed."""
    return replace(config, mode="full", seed=seed)
