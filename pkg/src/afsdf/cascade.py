"""Cascade of forest layers with importance-guided feature selection.

Each layer fits a roster of forests on its input vector, averages their
normalized feature importances, discards the lowest-ranked features at a
fixed ratio, and emits the kept columns concatenated with every forest's
class-probability vector.  Layer depth is chosen greedily from held-out
fold accuracy, keeping the best-scoring prefix.

Training-time probability columns come from out-of-fold cross-fitting so
later layers never see resubstitution estimates; each forest is then
refitted on all rows for deployment, importance ranking, and inference.

Column layout of every layer's output: kept input columns first (ascending
original order), then one probability block per forest in roster order
with classes in index order.  Under the default ``carried_only`` scope only
columns descended from the original features are ever discardable, so
probability blocks accumulate across layers; ``full_input`` ranks and
discards over the entire input vector instead.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._rng import derive_seed
from .dataset import (
    Dataset,
    FoldAssignment,
    StandardizerStats,
    standardize_apply,
    standardize_fit,
    stratified_folds,
)
from .errors import DataError, DimensionError, FoldError
from .forest import ForestConfig, ForestModel, fit_forest, forest_predict_proba

MASK_SCOPES = ("carried_only", "full_input")
SCORE_METRICS = ("accuracy", "auc")

_FOLD_STREAM = 0x466F4C64


def default_forest_roster() -> tuple[ForestConfig, ...]:
    """Heterogeneous per-layer roster: one GBDT, one random forest, and
    two extremely-randomized-tree forests of different sizes."""
    return (
        ForestConfig(kind="gbdt", n_trees=20),
        ForestConfig(kind="random_forest", n_trees=20),
        ForestConfig(kind="extra_trees", n_trees=20),
        ForestConfig(kind="extra_trees", n_trees=50),
    )


@dataclass(frozen=True)
class CascadeConfig:
    """Cascade hyperparameters.

    ``discard_ratio`` is the fraction of ranked features dropped per layer
    (0 disables selection); ``min_features`` floors how far the kept count
    may shrink.  ``mask_scope`` picks what the ranking covers: only the
    carried original-descended columns (default) or the whole input vector
    including probability columns.  ``score_metric`` drives layer growth.
    """

    forest_configs: tuple[ForestConfig, ...] = field(
        default_factory=default_forest_roster
    )
    discard_ratio: float = 0.2
    n_aug_folds: int = 5
    max_layers: int = 10
    patience: int = 1
    min_features: int = 16
    mask_scope: str = "carried_only"
    score_metric: str = "accuracy"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "forest_configs", tuple(self.forest_configs))
        if len(self.forest_configs) < 1:
            raise DataError("at least one forest config is required")
        for cfg in self.forest_configs:
            if not isinstance(cfg, ForestConfig):
                raise DataError("forest_configs entries must be ForestConfig")
        if not 0.0 <= self.discard_ratio < 1.0:
            raise DataError(
                "discard_ratio must lie in [0, 1), got %r" % (self.discard_ratio,)
            )
        if self.n_aug_folds < 2:
            raise DataError("n_aug_folds must be at least 2")
        if self.max_layers < 1:
            raise DataError("max_layers must be at least 1")
        if self.patience < 1:
            raise DataError("patience must be at least 1")
        if self.min_features < 1:
            raise DataError("min_features must be at least 1")
        if self.mask_scope not in MASK_SCOPES:
            raise DataError(
                "mask_scope must be one of %s, got %r" % (MASK_SCOPES, self.mask_scope)
            )
        if self.score_metric not in SCORE_METRICS:
            raise DataError(
                "score_metric must be one of %s, got %r"
                % (SCORE_METRICS, self.score_metric)
            )


@dataclass(frozen=True)
class SelectionMask:
    """Sorted column indices kept from a layer's input vector."""

    kept_indices: np.ndarray
    input_dim: int

    def __post_init__(self) -> None:
        kept = np.asarray(self.kept_indices, dtype=np.int64)
        object.__setattr__(self, "kept_indices", kept)
        if kept.ndim != 1 or kept.size == 0:
            raise DataError("a selection mask must keep at least one column")
        if (np.diff(kept) <= 0).any():
            raise DataError("kept_indices must be strictly increasing")
        if kept[0] < 0 or kept[-1] >= self.input_dim:
            raise DataError(
                "kept_indices must lie in [0, %d)" % self.input_dim
            )

    @property
    def n_kept(self) -> int:
        return int(self.kept_indices.size)

    def apply(self, X: np.ndarray) -> np.ndarray:
        if X.shape[1] != self.input_dim:
            raise DimensionError(
                "mask expects %d columns, got %d" % (self.input_dim, X.shape[1])
            )
        return X[:, self.kept_indices]


@dataclass
class LayerModel:
    """One fitted cascade layer.

    ``forests`` are the deployed (refit-on-all-rows) models; ``mask`` maps
    this layer's input columns to the carried part of its output.
    ``carried_dim`` is the width of the input prefix that descends from
    original features; the remaining input columns are probability blocks
    from earlier layers.
    """

    forests: list[ForestModel]
    importance_mean: np.ndarray
    mask: SelectionMask
    input_dim: int
    carried_dim: int
    output_dim: int


@dataclass
class CascadeModel:
    """Fitted cascade plus everything needed to run and archive it."""

    layers: list[LayerModel]
    n_original_features: int
    n_classes: int
    standardizer: StandardizerStats
    training_log: list[float]
    config: CascadeConfig
    feature_names: list[str]
    class_names: list[str]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim


def aggregate_importance(per_forest: Sequence[np.ndarray]) -> np.ndarray:
    """Elementwise arithmetic mean of the per-forest importance vectors."""
    if len(per_forest) == 0:
        raise DataError("at least one importance vector is required")
    first = np.asarray(per_forest[0], dtype=np.float64)
    acc = first.copy()
    for v in per_forest[1:]:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != first.shape:
            raise DimensionError(
                "importance vectors disagree on length: %d vs %d"
                % (first.size, v.size)
            )
        acc += v
    return acc / len(per_forest)


def select_features(
    importance: np.ndarray, discard_ratio: float, min_features: int
) -> SelectionMask:
    """Keep the ``ceil((1-ratio)*d)`` highest-importance indices.

    Never keeps fewer than ``min(min_features, d)``.  Ties at the boundary
    keep the lower index; the returned indices are sorted ascending.
    """
    imp = np.asarray(importance, dtype=np.float64)
    if imp.ndim != 1 or imp.size == 0:
        raise DataError("importance must be a non-empty 1-d vector")
    if not 0.0 <= discard_ratio < 1.0:
        raise DataError("discard_ratio must lie in [0, 1)")
    d = imp.size
    n_keep = math.ceil((1.0 - discard_ratio) * d)
    n_keep = max(n_keep, min(min_features, d))
    order = np.argsort(-imp, kind="stable")
    kept = np.sort(order[:n_keep])
    return SelectionMask(kept_indices=kept, input_dim=d)


def _build_mask(
    importance_mean: np.ndarray,
    carried_dim: int,
    config: CascadeConfig,
) -> SelectionMask:
    input_dim = importance_mean.size
    if config.mask_scope == "full_input" or carried_dim == input_dim:
        inner = select_features(
            importance_mean, config.discard_ratio, config.min_features
        )
        return SelectionMask(kept_indices=inner.kept_indices, input_dim=input_dim)
    carried = select_features(
        importance_mean[:carried_dim], config.discard_ratio, config.min_features
    )
    kept = np.concatenate(
        [carried.kept_indices, np.arange(carried_dim, input_dim, dtype=np.int64)]
    )
    return SelectionMask(kept_indices=kept, input_dim=input_dim)


def _map_ordered(fn, args_list, n_jobs: int) -> list:
    if n_jobs <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, args_list))


def _fit_layer_full(
    X: np.ndarray,
    y: np.ndarray,
    config: CascadeConfig,
    layer_index: int,
    folds: FoldAssignment,
    carried_dim: int,
    n_classes: int,
    n_jobs: int,
) -> tuple[LayerModel, np.ndarray, np.ndarray]:
    """Fit one layer; returns (model, augmented training output, out-of-fold
    ensemble probabilities used for the layer's validation score)."""
    n = X.shape[0]
    roster = config.forest_configs
    N = len(roster)
    k = config.n_aug_folds

    # One task per (forest, fold) plus one deployed refit per forest; every
    # task seeds itself from (cascade seed, layer, forest, fold) so results
    # are identical under any schedule.
    def run(task: tuple[int, int]):
        i, j = task
        cfg = replace(roster[i], seed=derive_seed(config.seed, layer_index, i, j))
        if j == k:
            return fit_forest(X, y, cfg, n_classes)
        train_idx, test_idx = folds.train_test(j)
        model = fit_forest(X[train_idx], y[train_idx], cfg, n_classes)
        return test_idx, forest_predict_proba(model, X[test_idx])

    tasks = [(i, j) for i in range(N) for j in range(k + 1)]
    results = _map_ordered(run, tasks, n_jobs)

    oof = [np.empty((n, n_classes)) for _ in range(N)]
    deployed: list[Optional[ForestModel]] = [None] * N
    for (i, j), res in zip(tasks, results):
        if j == k:
            deployed[i] = res
        else:
            test_idx, proba = res
            oof[i][test_idx] = proba

    importance_mean = aggregate_importance([m.importance for m in deployed])
    mask = _build_mask(importance_mean, carried_dim, config)
    augmented = np.concatenate([X[:, mask.kept_indices]] + oof, axis=1)

    ens = oof[0].copy()
    for block in oof[1:]:
        ens += block
    ens /= N

    layer = LayerModel(
        forests=deployed,
        importance_mean=importance_mean,
        mask=mask,
        input_dim=X.shape[1],
        carried_dim=carried_dim,
        output_dim=mask.n_kept + N * n_classes,
    )
    return layer, augmented, ens


def fit_layer(
    X,
    y,
    config: CascadeConfig,
    layer_index: int,
    *,
    folds: Optional[FoldAssignment] = None,
    carried_dim: Optional[int] = None,
    n_classes: Optional[int] = None,
    n_jobs: int = 1,
) -> tuple[LayerModel, np.ndarray]:
    """Fit a single layer on an explicit input matrix.

    Without ``folds`` a stratified assignment is derived from the config
    seed; without ``carried_dim`` the whole input counts as carried (the
    first layer's situation).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("layer input must be a 2-d matrix")
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise DimensionError(
            "labels length %d does not match %d rows" % (y.size, X.shape[0])
        )
    if np.unique(y).size < 2:
        raise DataError("layer training requires at least two classes")
    if folds is None:
        folds = stratified_folds(
            y, config.n_aug_folds, derive_seed(config.seed, _FOLD_STREAM)
        )
    if carried_dim is None:
        carried_dim = X.shape[1]
    if n_classes is None:
        n_classes = int(y.max()) + 1
    layer, augmented, _ = _fit_layer_full(
        X, y, config, layer_index, folds, carried_dim, n_classes, n_jobs
    )
    return layer, augmented


def _oof_score(y: np.ndarray, ens: np.ndarray, metric: str) -> float:
    if metric == "auc":
        from .evaluation import roc_auc

        if ens.shape[1] != 2:
            raise DataError("auc growth scoring requires a binary problem")
        return roc_auc(ens[:, 1], y).auc
    return float(np.mean(np.argmax(ens, axis=1) == y))


def fit_cascade(data: Dataset, config: CascadeConfig, n_jobs: int = 1) -> CascadeModel:
    """Grow the cascade greedily and keep the best-scoring layer prefix.

    The standardizer and one stratified fold assignment are fixed up front
    and reused by every layer.  A layer's validation score is the held-out
    accuracy (or AUC) of the forest-averaged out-of-fold probabilities;
    growth stops once ``patience`` consecutive layers fail to improve on
    the best score, or at ``max_layers``.  ``training_log`` keeps every
    grown layer's score, including layers beyond the kept prefix.
    """
    counts = np.bincount(data.labels, minlength=data.n_classes)
    small = np.nonzero(counts < config.n_aug_folds)[0]
    if small.size:
        raise FoldError(
            "class %r has %d samples; %d-fold cross-fitting needs at least %d"
            % (
                data.class_names[int(small[0])],
                int(counts[small[0]]),
                config.n_aug_folds,
                config.n_aug_folds,
            )
        )
    stats = standardize_fit(data.features)
    Z = standardize_apply(stats, data.features)
    y = data.labels
    folds = stratified_folds(
        y, config.n_aug_folds, derive_seed(config.seed, _FOLD_STREAM)
    )

    layers: list[LayerModel] = []
    log: list[float] = []
    carried = Z.shape[1]
    best_score = -math.inf
    best_len = 0
    stale = 0
    for layer_index in range(config.max_layers):
        layer, augmented, ens = _fit_layer_full(
            Z, y, config, layer_index, folds, carried, data.n_classes, n_jobs
        )
        score = _oof_score(y, ens, config.score_metric)
        layers.append(layer)
        log.append(score)
        if score > best_score:
            best_score = score
            best_len = len(layers)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
        Z = augmented
        carried = int(np.count_nonzero(layer.mask.kept_indices < layer.carried_dim))
    return CascadeModel(
        layers=layers[:best_len],
        n_original_features=data.n_features,
        n_classes=data.n_classes,
        standardizer=stats,
        training_log=log,
        config=config,
        feature_names=list(data.feature_names),
        class_names=list(data.class_names),
    )


def _check_samples(model: CascadeModel, samples) -> np.ndarray:
    X = np.ascontiguousarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_original_features:
        raise DimensionError(
            "cascade expects an (n, %d) matrix, got %s"
            % (model.n_original_features, "x".join(map(str, np.shape(samples))))
        )
    return X


def _layer_output(layer: LayerModel, Z: np.ndarray) -> np.ndarray:
    blocks = [layer.mask.apply(Z)]
    for forest in layer.forests:
        blocks.append(forest_predict_proba(forest, Z))
    return np.concatenate(blocks, axis=1)


def cascade_transform(model: CascadeModel, samples) -> np.ndarray:
    """Run samples through every layer; returns the last layer's output
    (kept columns plus all of its forests' probability blocks).

    Inference uses the deployed forests, so transforming the training rows
    does not reproduce the out-of-fold columns seen during fitting.
    """
    Z = standardize_apply(model.standardizer, _check_samples(model, samples))
    for layer in model.layers:
        Z = _layer_output(layer, Z)
    return Z


def cascade_predict_proba(model: CascadeModel, samples) -> np.ndarray:
    """Average of the last layer's forest probabilities; rows sum to one."""
    Z = standardize_apply(model.standardizer, _check_samples(model, samples))
    for layer in model.layers[:-1]:
        Z = _layer_output(layer, Z)
    last = model.layers[-1]
    acc = forest_predict_proba(last.forests[0], Z).copy()
    for forest in last.forests[1:]:
        acc += forest_predict_proba(forest, Z)
    return acc / len(last.forests)


def cascade_predict_label(model: CascadeModel, samples) -> np.ndarray:
    """Most probable class per row; ties go to the lower class index."""
    return np.argmax(cascade_predict_proba(model, samples), axis=1)


def surviving_original_features(
    model: CascadeModel, n_layers: Optional[int] = None
) -> np.ndarray:
    """Original-feature indices still carried after the first ``n_layers``
    masks (all layers by default), in ascending order."""
    if n_layers is None:
        n_layers = len(model.layers)
    ids = np.arange(model.n_original_features, dtype=np.int64)
    for layer in model.layers[:n_layers]:
        kept = layer.mask.kept_indices
        ids = ids[kept[kept < ids.size]]
    return ids


def original_importance(model: CascadeModel) -> np.ndarray:
    """Last-layer importance attributed back to the original features.

    Walks each layer's mask in reverse: carried columns inherit their
    ancestor's share, probability columns contribute nothing.  Discarded
    features get zero, so the vector sums to at most one.
    """
    v = model.layers[-1].importance_mean.copy()
    for layer in reversed(model.layers[:-1]):
        prev = np.zeros(layer.input_dim)
        kept = layer.mask.kept_indices
        carried_part = min(kept.size, v.size)
        for q in range(carried_part):
            prev[kept[q]] += v[q]
        v = prev
    out = np.zeros(model.n_original_features)
    limit = min(v.size, out.size)
    out[:limit] = v[:limit]
    return out
