"""Text file formats: CSV matrices, label lists, partition files, model
containers, training configs, toy specs, and key=value reports.

Matrices serialize with 17 significant decimal digits, so a write-read
round trip reproduces every float64 bit for bit. All numbers use the
period as the decimal separator regardless of locale.
"""

from __future__ import annotations

import os

import numpy as np

from .data import LabelPartition, LinearHead
from .errors import ParseError, ShapeError, ValidationError
from .trainer import ACTIVATIONS, EpochRecord, MlpModel, ToySpec, TrainConfig


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _read_lines(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror or exc}") from exc


def save_matrix(values, path) -> None:
    """Write a 2-D float64 matrix as CSV with a ``#shape`` header line."""
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError(f"matrix must be 2-D, got shape {matrix.shape}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"#shape {matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def load_matrix(path, expected_shape=None) -> np.ndarray:
    """Read a CSV matrix; the optional ``#shape`` header must match the body."""
    lines = _read_lines(path)
    declared = None
    start = 0
    if lines and lines[0].lstrip().startswith("#shape"):
        parts = lines[0].split()
        if len(parts) != 3:
            raise ParseError(f"{path}:1: malformed shape header {lines[0]!r}")
        try:
            declared = (int(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise ParseError(f"{path}:1: malformed shape header {lines[0]!r}") from exc
        start = 1

    rows = []
    width = None
    for number, line in enumerate(lines[start:], start + 1):
        text = line.strip()
        if not text:
            raise ParseError(f"{path}:{number}: blank line inside matrix")
        fields = text.split(",")
        try:
            row = [float(field) for field in fields]
        except ValueError:
            raise ParseError(f"{path}:{number}: not a comma-separated list of reals") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"{path}:{number}: expected {width} columns, found {len(row)}")
        rows.append(row)
    if not rows:
        raise ParseError(f"{path}: empty matrix file")

    matrix = np.array(rows, dtype=np.float64)
    if declared is not None and matrix.shape != declared:
        raise ShapeError(f"{path}: header declares {declared}, content is {matrix.shape}")
    if expected_shape is not None and matrix.shape != tuple(expected_shape):
        raise ShapeError(f"{path}: expected shape {tuple(expected_shape)}, got {matrix.shape}")
    return matrix


def save_labels(labels, path) -> None:
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1:
        raise ValidationError(f"labels must be 1-D, got shape {arr.shape}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for value in arr:
            handle.write(f"{int(value)}\n")


def load_labels(path) -> np.ndarray:
    lines = _read_lines(path)
    values = []
    for number, line in enumerate(lines, 1):
        text = line.strip()
        if not text:
            raise ParseError(f"{path}:{number}: blank line inside labels")
        try:
            value = int(text)
        except ValueError:
            raise ParseError(f"{path}:{number}: not an integer label") from None
        if value < 0:
            raise ParseError(f"{path}:{number}: labels must be nonnegative")
        values.append(value)
    if not values:
        raise ParseError(f"{path}: empty labels file")
    return np.array(values, dtype=np.int64)


def save_partition(partition: LabelPartition, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"num_classes={partition.num_classes}\n")
        handle.write("fine_tuning=" + ",".join(str(c) for c in partition.fine_tuning) + "\n")


def load_partition(path) -> LabelPartition:
    lines = [line.rstrip() for line in _read_lines(path)]
    if len(lines) != 2:
        raise ParseError(f"{path}: a partition file has exactly 2 lines, found {len(lines)}")
    if not lines[0].startswith("num_classes="):
        raise ParseError(f"{path}:1: expected 'num_classes=<C>'")
    if not lines[1].startswith("fine_tuning="):
        raise ParseError(f"{path}:2: expected 'fine_tuning=<indices>'")
    try:
        num_classes = int(lines[0].removeprefix("num_classes="))
        fine_tuning = tuple(
            int(field) for field in lines[1].removeprefix("fine_tuning=").split(",")
        )
    except ValueError as exc:
        raise ParseError(f"{path}: malformed integer field: {exc}") from None
    return LabelPartition(num_classes, fine_tuning)


def _parse_kv_lines(path, lines) -> dict:
    pairs = {}
    for number, line in enumerate(lines, 1):
        text = line.strip()
        if not text:
            continue
        if "=" not in text:
            raise ParseError(f"{path}:{number}: expected 'key=value'")
        key, _, value = text.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def save_model(model: MlpModel, path) -> None:
    """Model container: a ``[meta]`` section plus one CSV block per matrix."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("[meta]\n")
        handle.write(f"activation={model.activation}\n")
        handle.write(f"hidden_map_shape={model.dim_hidden} {model.dim_in}\n")
        handle.write(f"head_shape={model.num_classes} {model.dim_hidden}\n")
        handle.write("[hidden_map]\n")
        for row in model.hidden_map:
            handle.write(",".join(_fmt(v) for v in row) + "\n")
        handle.write("[head]\n")
        for row in model.head.weights:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def load_model(path) -> MlpModel:
    lines = _read_lines(path)
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for number, line in enumerate(lines, 1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("[") and text.endswith("]"):
            current = text[1:-1]
            if current in sections:
                raise ParseError(f"{path}:{number}: duplicate section [{current}]")
            sections[current] = []
            continue
        if current is None:
            raise ParseError(f"{path}:{number}: content before any section header")
        sections[current].append((number, text))

    for required in ("meta", "hidden_map", "head"):
        if required not in sections:
            raise ParseError(f"{path}: missing [{required}] section")
    meta = _parse_kv_lines(path, [text for _, text in sections["meta"]])
    activation = meta.get("activation", "linear")
    if activation not in ACTIVATIONS:
        raise ParseError(f"{path}: unknown activation {activation!r}")

    def parse_block(name):
        rows = []
        for number, text in sections[name]:
            try:
                rows.append([float(field) for field in text.split(",")])
            except ValueError:
                raise ParseError(f"{path}:{number}: not a comma-separated list of reals") from None
        if not rows:
            raise ParseError(f"{path}: section [{name}] is empty")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ParseError(f"{path}: ragged rows in section [{name}]")
        return np.array(rows, dtype=np.float64)

    hidden_map = parse_block("hidden_map")
    head = parse_block("head")
    for key, matrix in (("hidden_map_shape", hidden_map), ("head_shape", head)):
        if key in meta:
            try:
                declared = tuple(int(v) for v in meta[key].split())
            except ValueError:
                raise ParseError(f"{path}: malformed {key} {meta[key]!r}") from None
            if declared != matrix.shape:
                raise ShapeError(f"{path}: {key} declares {declared}, content is {matrix.shape}")
    return MlpModel(hidden_map=hidden_map, head=LinearHead(head), activation=activation)


def save_train_config(config: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(format_report(config.as_dict()))


def load_train_config(path) -> TrainConfig:
    pairs = _parse_kv_lines(path, _read_lines(path))
    known = {
        "learning_rate": float,
        "momentum": float,
        "weight_decay": float,
        "epochs": int,
        "batch_size": int,
        "mode": str,
        "seed": int,
    }
    unknown = sorted(set(pairs) - set(known))
    if unknown:
        raise ParseError(f"{path}: unknown config keys {unknown}")
    if "learning_rate" not in pairs:
        raise ParseError(f"{path}: learning_rate is required")
    kwargs = {}
    for key, value in pairs.items():
        try:
            kwargs[key] = known[key](value)
        except ValueError:
            raise ParseError(f"{path}: malformed value for {key}: {value!r}") from None
    return TrainConfig(**kwargs)


def load_toy_spec(path) -> ToySpec:
    pairs = _parse_kv_lines(path, _read_lines(path))
    known = ("class_means", "stddev", "shift", "samples_per_class", "fine_tuning")
    unknown = sorted(set(pairs) - set(known))
    if unknown:
        raise ParseError(f"{path}: unknown toy spec keys {unknown}")
    kwargs = {}
    try:
        if "class_means" in pairs:
            kwargs["class_means"] = tuple(
                tuple(float(v) for v in point.split(","))
                for point in pairs["class_means"].split(";")
            )
        if "stddev" in pairs:
            kwargs["stddev"] = float(pairs["stddev"])
        if "shift" in pairs:
            kwargs["shift"] = tuple(float(v) for v in pairs["shift"].split(","))
        if "samples_per_class" in pairs:
            kwargs["samples_per_class"] = int(pairs["samples_per_class"])
        if "fine_tuning" in pairs:
            kwargs["fine_tuning"] = tuple(int(v) for v in pairs["fine_tuning"].split(","))
    except ValueError as exc:
        raise ParseError(f"{path}: malformed toy spec value: {exc}") from None
    return ToySpec(**kwargs)


def save_toy_spec(spec: ToySpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(
            "class_means=" + ";".join(f"{_fmt(x)},{_fmt(y)}" for x, y in spec.class_means) + "\n"
        )
        handle.write(f"stddev={_fmt(spec.stddev)}\n")
        handle.write("shift=" + ",".join(_fmt(s) for s in spec.shift) + "\n")
        handle.write(f"samples_per_class={spec.samples_per_class}\n")
        handle.write("fine_tuning=" + ",".join(str(c) for c in spec.fine_tuning) + "\n")


def save_history(history: list[EpochRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("epoch,loss,accuracy\n")
        for record in history:
            handle.write(f"{record.epoch},{_fmt(record.loss)},{_fmt(record.accuracy)}\n")


def format_report(pairs: dict) -> str:
    """Key=value lines; floats use repr (shortest exact form), in insertion order."""
    lines = []
    for key, value in pairs.items():
        if isinstance(value, (float, np.floating)):
            lines.append(f"{key}={float(value)!r}")
        else:
            lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def write_report(pairs: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(format_report(pairs))


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
