"""Checksummed JSON model archives.

The archive is a single JSON document: ``{format_version, checksum,
payload}``.  The checksum is the SHA-256 of the payload serialized in
canonical form (sorted keys, compact separators), so any edit to the
payload is detected at load time.  Floats are serialized via their
``repr``, which round-trips exactly, making saved models byte-identical
across runs and their reloaded predictions bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from .cascade import CascadeConfig, CascadeModel, LayerModel, SelectionMask
from .dataset import StandardizerStats
from .errors import ArchiveChecksumError, ArchiveError, ArchiveVersionError
from .forest import ForestConfig, ForestModel
from .tree import DecisionTree, RegressionTree, TreeParams

FORMAT_VERSION = 1
MODEL_KIND = "afs_df_cascade"


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _checksum(payload: dict) -> str:
    return hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest()


def _tree_payload(tree: DecisionTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "leaf_dist": tree.leaf_dist.tolist(),
        "importance_raw": tree.importance_raw.tolist(),
    }


def _stage_payload(tree: RegressionTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "leaf_value": tree.leaf_value.tolist(),
        "importance_raw": tree.importance_raw.tolist(),
    }


def _forest_payload(model: ForestModel) -> dict:
    return {
        "kind": model.kind,
        "n_features_in": model.n_features_in,
        "n_classes": model.n_classes,
        "importance": model.importance.tolist(),
        "trees": [_tree_payload(t) for t in model.trees],
        "init_scores": list(model.init_scores),
        "stages": [[_stage_payload(t) for t in sub] for sub in model.stages],
        "training_loss": [list(sub) for sub in model.training_loss],
    }


def _config_payload(config: CascadeConfig) -> dict:
    return {
        "discard_ratio": config.discard_ratio,
        "n_aug_folds": config.n_aug_folds,
        "max_layers": config.max_layers,
        "patience": config.patience,
        "min_features": config.min_features,
        "mask_scope": config.mask_scope,
        "score_metric": config.score_metric,
        "seed": config.seed,
        "forest_configs": [
            {
                "kind": fc.kind,
                "n_trees": fc.n_trees,
                "bootstrap": fc.bootstrap,
                "learning_rate": fc.learning_rate,
                "gbdt_depth": fc.gbdt_depth,
                "seed": fc.seed,
                "tree_params": {
                    "max_depth": fc.tree_params.max_depth,
                    "min_samples_leaf": fc.tree_params.min_samples_leaf,
                    "min_samples_split": fc.tree_params.min_samples_split,
                    "mtry": fc.tree_params.mtry,
                    "split_mode": fc.tree_params.split_mode,
                    "seed": fc.tree_params.seed,
                },
            }
            for fc in config.forest_configs
        ],
    }


def model_payload(model: CascadeModel) -> dict:
    """JSON-native representation of a fitted cascade."""
    return {
        "model_kind": MODEL_KIND,
        "n_original_features": model.n_original_features,
        "n_classes": model.n_classes,
        "class_names": list(model.class_names),
        "feature_names": list(model.feature_names),
        "standardizer": {
            "means": model.standardizer.means.tolist(),
            "stdevs": model.standardizer.stdevs.tolist(),
        },
        "config": _config_payload(model.config),
        "training_log": list(model.training_log),
        "layers": [
            {
                "input_dim": layer.input_dim,
                "carried_dim": layer.carried_dim,
                "output_dim": layer.output_dim,
                "importance_mean": layer.importance_mean.tolist(),
                "mask_kept": layer.mask.kept_indices.tolist(),
                "forests": [_forest_payload(f) for f in layer.forests],
            }
            for layer in model.layers
        ],
    }


def save_model(model: CascadeModel, path) -> None:
    """Write the archive; the same model always yields identical bytes."""
    payload = model_payload(model)
    doc = {
        "format_version": FORMAT_VERSION,
        "checksum": _checksum(payload),
        "payload": payload,
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def _restore_tree(p: dict) -> DecisionTree:
    leaf_dist = np.array(p["leaf_dist"], dtype=np.float64)
    return DecisionTree(
        n_features_in=int(np.size(p["importance_raw"])),
        n_classes=int(leaf_dist.shape[1]),
        feature=np.array(p["feature"], dtype=np.int32),
        threshold=np.array(p["threshold"], dtype=np.float64),
        left=np.array(p["left"], dtype=np.int32),
        right=np.array(p["right"], dtype=np.int32),
        leaf_dist=np.ascontiguousarray(leaf_dist),
        importance_raw=np.array(p["importance_raw"], dtype=np.float64),
    )


def _restore_stage(p: dict) -> RegressionTree:
    return RegressionTree(
        n_features_in=int(np.size(p["importance_raw"])),
        feature=np.array(p["feature"], dtype=np.int32),
        threshold=np.array(p["threshold"], dtype=np.float64),
        left=np.array(p["left"], dtype=np.int32),
        right=np.array(p["right"], dtype=np.int32),
        leaf_value=np.array(p["leaf_value"], dtype=np.float64),
        importance_raw=np.array(p["importance_raw"], dtype=np.float64),
    )


def _restore_forest(p: dict) -> ForestModel:
    return ForestModel(
        kind=p["kind"],
        n_features_in=int(p["n_features_in"]),
        n_classes=int(p["n_classes"]),
        importance=np.array(p["importance"], dtype=np.float64),
        trees=[_restore_tree(t) for t in p["trees"]],
        init_scores=[float(v) for v in p["init_scores"]],
        stages=[[_restore_stage(t) for t in sub] for sub in p["stages"]],
        training_loss=[[float(v) for v in sub] for sub in p["training_loss"]],
    )


def _restore_config(p: dict) -> CascadeConfig:
    forests = tuple(
        ForestConfig(
            kind=fc["kind"],
            n_trees=int(fc["n_trees"]),
            bootstrap=bool(fc["bootstrap"]),
            learning_rate=float(fc["learning_rate"]),
            gbdt_depth=int(fc["gbdt_depth"]),
            seed=int(fc["seed"]),
            tree_params=TreeParams(
                max_depth=fc["tree_params"]["max_depth"],
                min_samples_leaf=int(fc["tree_params"]["min_samples_leaf"]),
                min_samples_split=int(fc["tree_params"]["min_samples_split"]),
                mtry=fc["tree_params"]["mtry"],
                split_mode=fc["tree_params"]["split_mode"],
                seed=int(fc["tree_params"]["seed"]),
            ),
        )
        for fc in p["forest_configs"]
    )
    return CascadeConfig(
        forest_configs=forests,
        discard_ratio=float(p["discard_ratio"]),
        n_aug_folds=int(p["n_aug_folds"]),
        max_layers=int(p["max_layers"]),
        patience=int(p["patience"]),
        min_features=int(p["min_features"]),
        mask_scope=p["mask_scope"],
        score_metric=p["score_metric"],
        seed=int(p["seed"]),
    )


def model_from_payload(payload: dict) -> CascadeModel:
    """Rebuild a cascade from its payload dictionary."""
    if payload.get("model_kind") != MODEL_KIND:
        raise ArchiveError(
            "archive holds model kind %r, expected %r"
            % (payload.get("model_kind"), MODEL_KIND)
        )
    layers = []
    for lp in payload["layers"]:
        layers.append(
            LayerModel(
                forests=[_restore_forest(f) for f in lp["forests"]],
                importance_mean=np.array(lp["importance_mean"], dtype=np.float64),
                mask=SelectionMask(
                    kept_indices=np.array(lp["mask_kept"], dtype=np.int64),
                    input_dim=int(lp["input_dim"]),
                ),
                input_dim=int(lp["input_dim"]),
                carried_dim=int(lp["carried_dim"]),
                output_dim=int(lp["output_dim"]),
            )
        )
    return CascadeModel(
        layers=layers,
        n_original_features=int(payload["n_original_features"]),
        n_classes=int(payload["n_classes"]),
        standardizer=StandardizerStats(
            means=np.array(payload["standardizer"]["means"], dtype=np.float64),
            stdevs=np.array(payload["standardizer"]["stdevs"], dtype=np.float64),
        ),
        training_log=[float(v) for v in payload["training_log"]],
        config=_restore_config(payload["config"]),
        feature_names=[str(s) for s in payload["feature_names"]],
        class_names=[str(s) for s in payload["class_names"]],
    )


def load_model(path) -> CascadeModel:
    """Read an archive, verifying format version and payload checksum."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ArchiveError("cannot read model archive %s: %s" % (p, exc)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArchiveError("not a valid model archive %s: %s" % (p, exc)) from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise ArchiveError("not a model archive (no format_version): %s" % p)
    version = doc["format_version"]
    if version != FORMAT_VERSION:
        raise ArchiveVersionError(
            "archive %s has format_version %r; this build reads version %d"
            % (p, version, FORMAT_VERSION)
        )
    payload = doc.get("payload")
    stored = doc.get("checksum")
    if not isinstance(payload, dict) or not isinstance(stored, str):
        raise ArchiveError("archive %s is missing payload or checksum" % p)
    actual = _checksum(payload)
    if actual != stored:
        raise ArchiveChecksumError(
            "archive %s failed checksum verification (stored %s..., computed %s...)"
            % (p, stored[:12], actual[:12])
        )
    try:
        return model_from_payload(payload)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ArchiveError("archive %s has malformed payload: %s" % (p, exc)) from exc
