"""Command-line interface: train, predict, evaluate, cv, importance, synth.

Every command is a single-invocation batch process.  Errors from this
package surface as one-line ``error: ...`` diagnostics on stderr with exit
code 1; exit code 0 means the command completed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._rng import derive_seed
from .cascade import (
    CascadeConfig,
    CascadeModel,
    cascade_predict_proba,
    fit_cascade,
    original_importance,
    surviving_original_features,
)
from .dataset import Dataset, SyntheticSpec, load_csv, synth_generate
from .errors import AfsdfError, DataError
from .evaluation import (
    CvReport,
    LogregSpec,
    acc,
    confusion,
    crossval_evaluate,
    roc_auc,
    sen,
    spe,
)
from .forest import ForestConfig
from .persistence import load_model, save_model

DEFAULT_ROSTER_SPEC = "gbdt:20,rf:20,et:20,et:50"

_KIND_ALIASES = {
    "gbdt": "gbdt",
    "rf": "random_forest",
    "random_forest": "random_forest",
    "et": "extra_trees",
    "extra_trees": "extra_trees",
}

_HOLDOUT_STREAM = 0x401D0


@dataclass(frozen=True)
class RunConfig:
    """Parsed training options; the defaults are the reference setup:
    discard ratio 0.2, roster gbdt:20,rf:20,et:20,et:50, 5 folds."""

    data: str = ""
    label_col: str = "label"
    seed: int = 0
    discard_ratio: float = 0.2
    forests: str = DEFAULT_ROSTER_SPEC
    max_layers: int = 10
    folds: int = 5
    min_features: int = 16
    patience: int = 1
    mask_scope: str = "carried_only"
    score_metric: str = "accuracy"
    model_path: str = "model.json"
    report_path: str = ""


def parse_forest_roster(spec: str) -> tuple[ForestConfig, ...]:
    """Parse ``kind:count,...`` (kinds gbdt, rf/random_forest,
    et/extra_trees) into forest configs."""
    configs = []
    for raw in spec.split(","):
        entry = raw.strip()
        if not entry:
            raise DataError("empty entry in forest roster %r" % spec)
        name, colon, count_text = entry.partition(":")
        if not colon:
            raise DataError(
                "forest roster entry %r must look like kind:count" % entry
            )
        kind = _KIND_ALIASES.get(name.strip().lower())
        if kind is None:
            raise DataError(
                "unknown forest kind %r (use gbdt, rf, or et)" % name.strip()
            )
        try:
            count = int(count_text)
        except ValueError:
            raise DataError(
                "forest roster count %r is not an integer" % count_text
            ) from None
        configs.append(ForestConfig(kind=kind, n_trees=count))
    return tuple(configs)


def _cascade_config(args, discard_override: float | None = None) -> CascadeConfig:
    ratio = args.discard_ratio if discard_override is None else discard_override
    return CascadeConfig(
        forest_configs=parse_forest_roster(args.forests),
        discard_ratio=ratio,
        n_aug_folds=args.aug_folds if hasattr(args, "aug_folds") else args.folds,
        max_layers=args.max_layers,
        patience=args.patience,
        min_features=args.min_features,
        mask_scope=args.mask_scope,
        score_metric=args.score_metric,
        seed=args.seed,
    )


def _write_json(path: str, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _stratified_holdout(
    labels: np.ndarray, fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class split reserving about ``fraction`` of each class."""
    holdout = []
    for c in np.unique(labels):
        rows = np.nonzero(labels == c)[0]
        rng = np.random.default_rng(derive_seed(seed, _HOLDOUT_STREAM, int(c)))
        perm = rows[rng.permutation(rows.size)]
        take = int(math.ceil(fraction * rows.size))
        if take >= rows.size:
            raise DataError(
                "holdout fraction %g leaves no training rows for class index %d"
                % (fraction, int(c))
            )
        holdout.append(perm[:take])
    test_idx = np.sort(np.concatenate(holdout))
    mask = np.ones(labels.size, dtype=bool)
    mask[test_idx] = False
    return np.nonzero(mask)[0], test_idx


def cmd_train(args) -> int:
    data = load_csv(args.data, args.label_col)
    config = _cascade_config(args)
    holdout_idx = None
    train_data = data
    if args.holdout > 0:
        train_idx, holdout_idx = _stratified_holdout(
            data.labels, args.holdout, args.seed
        )
        train_data = data.subset(train_idx)
    model = fit_cascade(train_data, config, n_jobs=args.jobs)
    save_model(model, args.model)

    layer_dims = [
        {
            "input_dim": layer.input_dim,
            "kept": layer.mask.n_kept,
            "output_dim": layer.output_dim,
            "carried_in": layer.carried_dim,
        }
        for layer in model.layers
    ]
    report = {
        "n_samples": train_data.n_samples,
        "n_features": train_data.n_features,
        "n_classes": train_data.n_classes,
        "class_names": model.class_names,
        "selection_enabled": config.discard_ratio > 0,
        "discard_ratio": config.discard_ratio,
        "n_layers": model.n_layers,
        "training_log": model.training_log,
        "layer_dims": layer_dims,
        "final_output_dim": model.output_dim,
        "surviving_original_features": int(
            surviving_original_features(model).size
        ),
        "model_path": str(args.model),
        "seed": args.seed,
    }
    if holdout_idx is not None:
        Xh = data.features[holdout_idx]
        yh = data.labels[holdout_idx]
        proba = cascade_predict_proba(model, Xh)
        preds = np.argmax(proba, axis=1)
        held = {"n": int(holdout_idx.size), "acc": float(np.mean(preds == yh))}
        if data.n_classes == 2:
            cm = confusion(yh, preds, 1)
            held["sen"] = sen(cm)
            held["spe"] = spe(cm)
            held["auc"] = roc_auc(proba[:, 1], yh).auc
        report["holdout"] = held
    if args.report:
        _write_json(args.report, report)

    for i, (score, dims) in enumerate(zip(model.training_log, layer_dims), start=1):
        print(
            "layer %d: score %.4f  input %d -> kept %d -> output %d"
            % (i, score, dims["input_dim"], dims["kept"], dims["output_dim"])
        )
    for i, score in enumerate(model.training_log[len(layer_dims):]):
        print("layer %d: score %.4f (dropped)" % (len(layer_dims) + i + 1, score))
    print(
        "kept %d layer(s); selection %s; model written to %s"
        % (
            model.n_layers,
            "enabled" if config.discard_ratio > 0 else "disabled",
            args.model,
        )
    )
    if holdout_idx is not None:
        print("holdout accuracy: %.4f (n=%d)" % (report["holdout"]["acc"], report["holdout"]["n"]))
    return 0


def _read_feature_csv(path: str, drop_column: str | None) -> tuple[list[str], np.ndarray]:
    """Read an unlabeled feature CSV; optionally drop one named column."""
    try:
        fh = open(path, "r", encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise DataError("cannot open %s: %s" % (path, exc.strerror or exc)) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("%s is empty (missing header row)" % path) from None
        drop_pos = None
        if drop_column is not None and drop_column in header:
            drop_pos = header.index(drop_column)
            header = [h for i, h in enumerate(header) if i != drop_pos]
        rows = []
        for row_num, cells in enumerate(reader, start=1):
            expected = len(header) + (1 if drop_pos is not None else 0)
            if len(cells) != expected:
                raise DataError(
                    "%s row %d has %d cells, expected %d"
                    % (path, row_num, len(cells), expected)
                )
            parsed = []
            for pos, cell in enumerate(cells):
                if pos == drop_pos:
                    continue
                name = header[pos if drop_pos is None or pos < drop_pos else pos - 1]
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        "%s row %d, column %s: %r is not numeric"
                        % (path, row_num, name, cell)
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        "%s row %d, column %s: %r is not finite"
                        % (path, row_num, name, cell)
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise DataError("%s has a header but no data rows" % path)
    return header, np.array(rows, dtype=np.float64)


def _check_schema(names: list[str], model: CascadeModel, path: str) -> None:
    expected = model.feature_names
    if names == expected:
        return
    if len(names) != len(expected):
        raise DataError(
            "%s has %d feature columns, model expects %d"
            % (path, len(names), len(expected))
        )
    for pos, (got, want) in enumerate(zip(names, expected)):
        if got != want:
            raise DataError(
                "%s column %d is %r, model expects %r (columns are matched "
                "by name and order)" % (path, pos + 1, got, want)
            )


def cmd_predict(args) -> int:
    model = load_model(args.model)
    names, X = _read_feature_csv(args.data, args.label_col)
    _check_schema(names, model, args.data)
    proba = cascade_predict_proba(model, X)
    labels = np.argmax(proba, axis=1)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id"] + ["p_%s" % name for name in model.class_names] + ["label"]
        )
        for i in range(X.shape[0]):
            row = [str(i)]
            row += [repr(float(v)) for v in proba[i]]
            row.append(model.class_names[int(labels[i])])
            writer.writerow(row)
    print("wrote %d predictions to %s" % (X.shape[0], args.out))
    return 0


def _remap_labels(data: Dataset, model: CascadeModel) -> np.ndarray:
    """Map the CSV's first-appearance label indices onto the model's
    class order; unknown label names are an error."""
    mapping = np.empty(data.n_classes, dtype=np.int64)
    for i, name in enumerate(data.class_names):
        if name not in model.class_names:
            raise DataError(
                "label %r is not one of the model's classes %s"
                % (name, model.class_names)
            )
        mapping[i] = model.class_names.index(name)
    return mapping[data.labels]


def _positive_index(name: str | None, class_names: list[str]) -> int:
    if name is None:
        return 1
    if name not in class_names:
        raise DataError(
            "positive class %r is not one of %s" % (name, class_names)
        )
    return class_names.index(name)


def _write_roc(path: str, curve) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in curve.points:
            writer.writerow([repr(fpr), repr(tpr)])


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data, args.label_col)
    _check_schema(data.feature_names, model, args.data)
    y = _remap_labels(data, model)
    proba = cascade_predict_proba(model, data.features)
    preds = np.argmax(proba, axis=1)
    report: dict = {"n": data.n_samples, "acc": float(np.mean(preds == y))}
    line = "ACC %.4f" % report["acc"]
    if model.n_classes == 2:
        pos = _positive_index(args.positive_class, model.class_names)
        cm = confusion(y, preds, pos)
        curve = roc_auc(proba[:, pos], (y == pos).astype(np.int64))
        report.update(
            {
                "sen": sen(cm),
                "spe": spe(cm),
                "auc": curve.auc,
                "positive_class": model.class_names[pos],
                "confusion": {"tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn},
            }
        )
        line += "  SEN %.4f  SPE %.4f  AUC %.4f" % (
            report["sen"],
            report["spe"],
            report["auc"],
        )
        if args.roc_out:
            _write_roc(args.roc_out, curve)
    elif args.roc_out:
        raise DataError("--roc-out requires a binary model")
    print(line)
    if args.out:
        _write_json(args.out, report)
    return 0


def _model_registry(args) -> dict[str, object]:
    return {
        "afs-df": _cascade_config(args),
        "df": _cascade_config(args, discard_override=0.0),
        "rf": ForestConfig(kind="random_forest", n_trees=args.rf_trees),
        "logreg": LogregSpec(),
    }


def _pm(mean: float, std: float) -> str:
    return "%.2f ± %.2f" % (mean * 100.0, std * 100.0)


def cmd_cv(args) -> int:
    data = load_csv(args.data, args.label_col)
    registry = _model_registry(args)
    names = [m.strip() for m in args.models.split(",") if m.strip()]
    if not names:
        raise DataError("no models requested")
    unknown = [m for m in names if m not in registry]
    if unknown:
        raise DataError(
            "unknown model %r (choose from %s)"
            % (unknown[0], ", ".join(sorted(registry)))
        )
    if args.roc_out and len(names) != 1:
        raise DataError("--roc-out needs exactly one model, got %d" % len(names))
    pos = _positive_index(args.positive_class, data.class_names)

    header = "%-8s  %-14s  %-14s  %-14s  %-14s" % ("model", "ACC", "SEN", "SPE", "AUC")
    print(header)
    print("-" * len(header))
    results: dict[str, CvReport] = {}
    for name in names:
        rep = crossval_evaluate(
            data,
            registry[name],
            k=args.folds,
            seed=args.seed,
            n_jobs=args.jobs,
            positive_class=pos,
        )
        results[name] = rep
        print(
            "%-8s  %-14s  %-14s  %-14s  %-14s"
            % (
                name,
                _pm(rep.mean["acc"], rep.std["acc"]),
                _pm(rep.mean["sen"], rep.std["sen"]),
                _pm(rep.mean["spe"], rep.std["spe"]),
                _pm(rep.mean["auc"], rep.std["auc"]),
            )
        )
    if args.roc_out:
        rep = results[names[0]]
        _write_roc(args.roc_out, roc_auc(rep.pooled_scores, rep.pooled_labels))
    if args.out:
        _write_json(
            args.out,
            {
                name: {
                    "k": rep.k,
                    "mean": rep.mean,
                    "std": rep.std,
                    "per_fold": [fm.as_dict() for fm in rep.per_fold],
                }
                for name, rep in results.items()
            },
        )
    return 0


def cmd_importance(args) -> int:
    model = load_model(args.model)
    traced = original_importance(model)
    order = np.argsort(-traced, kind="stable")
    top = order[: min(args.top_k, traced.size)]
    rows = [
        (model.feature_names[int(i)], float(traced[int(i)])) for i in top
    ]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", "feature", "importance"])
            for rank, (name, value) in enumerate(rows, start=1):
                writer.writerow([str(rank), name, repr(value)])
    for rank, (name, value) in enumerate(rows, start=1):
        print("%3d  %-24s  %.6f" % (rank, name, value))
    return 0


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_samples=args.samples,
        n_informative=args.informative,
        n_redundant=args.redundant,
        n_noise=args.noise,
        class_separation=args.separation,
        seed=args.seed,
    )
    data = synth_generate(spec)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + [args.label_col])
        for i in range(data.n_samples):
            row = [repr(float(v)) for v in data.features[i]]
            row.append(data.class_names[int(data.labels[i])])
            writer.writerow(row)
    print(
        "wrote %d samples x %d features to %s"
        % (data.n_samples, data.n_features, args.out)
    )
    return 0


def _add_common_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument(
        "--label-col", default="label", help="label column name (default: label)"
    )


def _add_cascade_flags(p: argparse.ArgumentParser) -> None:
    defaults = RunConfig()
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument(
        "--discard-ratio",
        type=float,
        default=defaults.discard_ratio,
        help="fraction of ranked features dropped per layer (0 disables selection)",
    )
    p.add_argument(
        "--forests",
        default=defaults.forests,
        help="roster as kind:count,... (kinds gbdt, rf, et); default %s"
        % DEFAULT_ROSTER_SPEC,
    )
    p.add_argument("--max-layers", type=int, default=defaults.max_layers)
    p.add_argument("--min-features", type=int, default=defaults.min_features)
    p.add_argument("--patience", type=int, default=defaults.patience)
    p.add_argument(
        "--mask-scope",
        choices=["carried_only", "full_input"],
        default=defaults.mask_scope,
    )
    p.add_argument(
        "--score-metric", choices=["accuracy", "auc"], default=defaults.score_metric
    )
    p.add_argument("--jobs", type=int, default=1, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="afsdf",
        description="Adaptive feature selection guided deep forest for tabular "
        "classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    defaults = RunConfig()

    p = sub.add_parser("train", help="fit a cascade and write a model archive")
    _add_common_data_flags(p)
    _add_cascade_flags(p)
    p.add_argument(
        "--folds",
        type=int,
        default=defaults.folds,
        help="folds for the in-layer probability cross-fitting",
    )
    p.add_argument("--model", default=defaults.model_path, help="archive output path")
    p.add_argument("--report", default="", help="optional JSON training report path")
    p.add_argument(
        "--holdout",
        type=float,
        default=0.0,
        help="fraction held out for a final report metric (0 trains on all rows)",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write per-class probabilities and labels")
    p.add_argument("--data", required=True, help="feature CSV path")
    p.add_argument(
        "--label-col",
        default=None,
        help="if the CSV carries this column it is dropped before matching",
    )
    p.add_argument("--model", required=True, help="model archive path")
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a labeled CSV with a saved model")
    _add_common_data_flags(p)
    p.add_argument("--model", required=True, help="model archive path")
    p.add_argument("--out", default="", help="optional JSON metrics path")
    p.add_argument("--roc-out", default="", help="optional ROC points CSV path")
    p.add_argument(
        "--positive-class",
        default=None,
        help="class name treated as positive (default: the model's second class)",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="k-fold comparison of models on a labeled CSV")
    _add_common_data_flags(p)
    _add_cascade_flags(p)
    p.add_argument(
        "--models",
        default="afs-df",
        help="comma list from: afs-df, df (no selection), rf, logreg",
    )
    p.add_argument(
        "--folds", type=int, default=defaults.folds, help="outer evaluation folds"
    )
    p.add_argument(
        "--aug-folds",
        type=int,
        default=defaults.folds,
        help="in-layer cross-fitting folds for cascade models",
    )
    p.add_argument(
        "--rf-trees", type=int, default=500, help="trees for the rf baseline"
    )
    p.add_argument("--out", default="", help="optional JSON report path")
    p.add_argument(
        "--roc-out", default="", help="pooled ROC CSV (single model only)"
    )
    p.add_argument("--positive-class", default=None)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("importance", help="rank original features by traced mass")
    p.add_argument("--model", required=True, help="model archive path")
    p.add_argument("--out", default="", help="optional CSV output path")
    p.add_argument("--top-k", type=int, default=30)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("synth", help="generate a synthetic benchmark CSV")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--label-col", default="label")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--informative", type=int, default=10)
    p.add_argument("--redundant", type=int, default=10)
    p.add_argument("--noise", type=int, default=30)
    p.add_argument("--separation", type=float, default=1.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except AfsdfError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
