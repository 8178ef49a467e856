"""Command-line interface binding every module into file-based pipelines.

Exit status: 0 on success, 1 on usage errors, 2 on data/validation errors,
3 on numerical or training failures.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import io
from .analysis import (
    absent_binary_prob,
    delta_w_similarity,
    gt_vs_top_nongt_absent,
    linear_cka,
    logit_gap_stats,
    weight_norms,
)
from .calibration import (
    apply_gamma,
    estimate_gamma_alg,
    estimate_gamma_pcv,
    estimate_gamma_star,
)
from .data import (
    LabeledFeatures,
    LabeledLogits,
    LinearHead,
    make_greedy_similar_split,
    make_random_split,
)
from .errors import EmptyGroupError, TrainingError, ValidationError
from .metrics import acc_report, ausuc, format_curve_csv, seen_unseen_curve
from .ncm import class_means, ncm_predict
from .pipeline import run_toy_pipeline
from .trainer import ToySpec, default_train_config, fine_tune, gradient_check

GRADCHECK_TOLERANCE = 1e-6


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_logits(logits_path, labels_path) -> LabeledLogits:
    return LabeledLogits(io.load_matrix(logits_path), io.load_labels(labels_path))


def _load_features(features_path, labels_path) -> LabeledFeatures:
    return LabeledFeatures(io.load_matrix(features_path), io.load_labels(labels_path))


def _emit(pairs: dict, out_path=None) -> None:
    text = io.format_report(pairs)
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)


def _cmd_metrics(args) -> int:
    logits = _load_logits(args.logits, args.labels)
    partition = io.load_partition(args.partition)
    _emit(acc_report(logits, partition, gamma=args.gamma).as_dict())
    return 0


def _cmd_ausuc(args) -> int:
    logits = _load_logits(args.logits, args.labels)
    partition = io.load_partition(args.partition)
    curve = seen_unseen_curve(logits, partition)
    if args.curve_out:
        with open(args.curve_out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(format_curve_csv(curve))
    _emit({"ausuc": ausuc(curve)})
    return 0


def _cmd_calibrate(args) -> int:
    logits = _load_logits(args.logits, args.labels)
    partition = io.load_partition(args.partition)
    io.save_labels(apply_gamma(logits, partition, args.gamma), args.out)
    return 0


def _cmd_alg(args) -> int:
    logits = _load_logits(args.train_logits, args.train_labels)
    partition = io.load_partition(args.partition)
    _emit(estimate_gamma_alg(logits, partition).as_dict(), args.out)
    return 0


def _cmd_pcv(args) -> int:
    features = _load_features(args.train_features, args.train_labels)
    model = io.load_model(args.model)
    partition = io.load_partition(args.partition)
    config = io.load_train_config(args.config)
    estimate = estimate_gamma_pcv(
        features,
        model,
        partition,
        config,
        repeats=args.repeats,
        seed=args.seed,
        finetune_on_pseudo_absent=args.finetune_on_pseudo_absent,
    )
    _emit(estimate.as_dict(), args.out)
    return 0


def _cmd_gamma_star(args) -> int:
    logits = _load_logits(args.logits, args.labels)
    partition = io.load_partition(args.partition)
    _emit(estimate_gamma_star(logits, partition).as_dict(), args.out)
    return 0


def _ncm_accuracy(eval_data, means, partition, group_a, group_b) -> float:
    """NCM Acc_{A/B}: re-predict A-labeled samples with label space B."""
    mask = np.isin(eval_data.labels, partition.group_indices(group_a))
    if not mask.any():
        raise EmptyGroupError(f"no samples labeled in group {group_a}")
    subset = LabeledFeatures(eval_data.values[mask], eval_data.labels[mask])
    preds = ncm_predict(subset, means, partition.group_indices(group_b))
    return float(np.mean(preds == subset.labels))


def _cmd_ncm(args) -> int:
    mean_data = _load_features(args.mean_features, args.mean_labels)
    eval_data = _load_features(args.eval_features, args.eval_labels)
    partition = io.load_partition(args.partition)
    means = class_means(mean_data, range(partition.num_classes))
    if args.restrict == "Y":
        counts = {
            "count_s": int(np.isin(eval_data.labels, partition.group_indices("S")).sum()),
            "count_u": int(np.isin(eval_data.labels, partition.group_indices("U")).sum()),
        }
        _emit(
            {
                "acc_y_y": _ncm_accuracy(eval_data, means, partition, "Y", "Y"),
                "acc_s_y": _ncm_accuracy(eval_data, means, partition, "S", "Y"),
                "acc_u_y": _ncm_accuracy(eval_data, means, partition, "U", "Y"),
                "acc_s_s": _ncm_accuracy(eval_data, means, partition, "S", "S"),
                "acc_u_u": _ncm_accuracy(eval_data, means, partition, "U", "U"),
                **counts,
                "count_y": eval_data.num_samples,
            }
        )
    else:
        low = args.restrict.lower()
        _emit(
            {
                f"acc_s_{low}": _ncm_accuracy(eval_data, means, partition, "S", args.restrict),
                f"acc_u_{low}": _ncm_accuracy(eval_data, means, partition, "U", args.restrict),
                f"acc_y_{low}": _ncm_accuracy(eval_data, means, partition, "Y", args.restrict),
            }
        )
    return 0


def _cmd_cka(args) -> int:
    a = io.load_matrix(args.weights_a)
    b = io.load_matrix(args.weights_b)
    if args.rows:
        try:
            rows = [int(r) for r in args.rows.split(",")]
        except ValueError:
            raise ValidationError(f"--rows must be comma-separated integers, got {args.rows!r}")
        if any(r < 0 or r >= min(a.shape[0], b.shape[0]) for r in rows):
            raise ValidationError("--rows index out of range")
        a, b = a[rows], b[rows]
    _emit({"cka": linear_cka(a, b)})
    return 0


def _cmd_delta_w(args) -> int:
    pre = LinearHead(io.load_matrix(args.pre))
    ft = LinearHead(io.load_matrix(args.ft))
    partition = io.load_partition(args.partition)
    report = delta_w_similarity(pre, ft, partition.group_indices(args.group))
    if args.out:
        io.save_matrix(report.matrix, args.out)
    _emit(
        {
            "group": args.group,
            "subset": ",".join(str(c) for c in report.subset),
            "mean_offdiag": report.mean_offdiag,
        }
    )
    return 0


def _cmd_diagnose(args) -> int:
    logits = _load_logits(args.logits, args.labels)
    partition = io.load_partition(args.partition)
    head = LinearHead(io.load_matrix(args.head))
    seen_norm, absent_norm = weight_norms(head, partition)
    gap_seen, gap_absent = logit_gap_stats(logits, partition)
    gt_mean, top_nongt = gt_vs_top_nongt_absent(logits, partition)
    _emit(
        {
            "mean_seen_weight_norm": seen_norm,
            "mean_absent_weight_norm": absent_norm,
            "mean_nongt_seen_logit": gap_seen,
            "mean_nongt_absent_logit": gap_absent,
            "absent_binary_prob": absent_binary_prob(logits, partition),
            "mean_gt_logit_absent": gt_mean,
            "mean_top_nongt_absent_logit": top_nongt,
        }
    )
    return 0


def _cmd_split(args) -> int:
    if args.mode == "random":
        partition = make_random_split(args.num_classes, args.k, args.seed)
    else:
        if not args.class_means:
            raise ValidationError("greedy split requires --class-means")
        means = io.load_matrix(args.class_means)
        if means.shape[0] != args.num_classes:
            raise ValidationError(
                f"--num-classes is {args.num_classes} but --class-means has {means.shape[0]} rows"
            )
        partition = make_greedy_similar_split(means, args.k)
    io.save_partition(partition, args.out)
    _emit(
        {
            "num_classes": partition.num_classes,
            "fine_tuning": ",".join(str(c) for c in partition.fine_tuning),
        }
    )
    return 0


def _cmd_train(args) -> int:
    data = _load_features(args.features, args.labels)
    model = io.load_model(args.model_in)
    partition = io.load_partition(args.partition)
    config = replace(io.load_train_config(args.config), mode=args.mode.replace("-", "_"))
    trained, history = fine_tune(model, data, partition.fine_tuning, config)
    io.save_model(trained, args.model_out)
    io.save_history(history, args.history_out or args.model_out + ".history.csv")
    _emit({"epochs": len(history), "final_loss": history[-1].loss, "final_accuracy": history[-1].accuracy})
    return 0


def _cmd_toy(args) -> int:
    spec = io.load_toy_spec(args.spec) if args.spec else ToySpec()
    if args.config:
        config = io.load_train_config(args.config)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    else:
        config = default_train_config(seed=args.seed if args.seed is not None else 0)
    report = run_toy_pipeline(spec, config, args.outdir)
    _emit(
        {
            "outdir": report.outdir,
            "ausuc_pretrained": report.pretrained_ausuc,
            "ausuc_finetuned": report.finetuned_ausuc,
            "gamma_star": report.gamma_star.value,
            "acc_u_y_pretrained": report.pretrained_acc.acc_u_y,
            "acc_u_y_finetuned": report.finetuned_acc.acc_u_y,
            "acc_y_y_calibrated": report.calibrated_acc.acc_y_y,
        }
    )
    return 0


def _cmd_gradcheck(args) -> int:
    worst = gradient_check(num_cases=args.cases, seed=args.seed)
    _emit({"max_relative_error": worst, "tolerance": GRADCHECK_TOLERANCE})
    return 0 if worst <= GRADCHECK_TOLERANCE else 3


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ftcal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="group accuracy report, optionally gamma-calibrated")
    p.add_argument("--logits", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("ausuc", help="area under the exact seen-unseen curve")
    p.add_argument("--logits", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--curve-out")
    p.set_defaults(func=_cmd_ausuc)

    p = sub.add_parser("calibrate", help="write gamma-calibrated predicted labels")
    p.add_argument("--logits", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("alg", help="estimate gamma from the average logit gap")
    p.add_argument("--train-logits", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_alg)

    p = sub.add_parser("pcv", help="estimate gamma by pseudo cross-validation")
    p.add_argument("--train-features", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--finetune-on-pseudo-absent",
        action="store_true",
        help="fine-tune the pseudo-absent subset instead (swapped-convention replication)",
    )
    p.add_argument("--out")
    p.set_defaults(func=_cmd_pcv)

    p = sub.add_parser("gamma-star", help="cheating gamma maximizing overall test accuracy")
    p.add_argument("--logits", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_gamma_star)

    p = sub.add_parser("ncm", help="nearest-class-mean accuracy with held-out means")
    p.add_argument("--mean-features", required=True)
    p.add_argument("--mean-labels", required=True)
    p.add_argument("--eval-features", required=True)
    p.add_argument("--eval-labels", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--restrict", choices=["S", "U", "Y"], default="Y")
    p.set_defaults(func=_cmd_ncm)

    p = sub.add_parser("cka", help="linear CKA between two weight matrices")
    p.add_argument("--weights-a", required=True)
    p.add_argument("--weights-b", required=True)
    p.add_argument("--rows", help="comma-separated row indices to compare")
    p.set_defaults(func=_cmd_cka)

    p = sub.add_parser("delta-w", help="update-direction similarity within a group")
    p.add_argument("--pre", required=True)
    p.add_argument("--ft", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--group", choices=["S", "U"], required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_delta_w)

    p = sub.add_parser("diagnose", help="bundled logit and weight diagnostics")
    p.add_argument("--logits", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--head", required=True)
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("split", help="generate a label-space partition")
    p.add_argument("--mode", choices=["random", "greedy"], required=True)
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class-means")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train", help="fine-tune a model on labeled features")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model-in", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--mode", choices=["full", "frozen-classifier", "linear-probe"], required=True)
    p.add_argument("--history-out")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("toy", help="run the full toy experiment fixture")
    p.add_argument("--outdir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--spec")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_toy)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=100)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except TrainingError as exc:
        sys.stderr.write(f"training failure: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
