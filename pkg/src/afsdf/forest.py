"""Tree ensembles: random forest, extremely randomized trees, and GBDT.

All three share the prediction contract ``forest_predict_proba`` (rows sum
to one) and a normalized per-feature importance vector, which is what the
cascade consumes for its feature-selection step.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import backend
from ._rng import derive_seed
from .errors import DataError, DimensionError
from .tree import (
    DecisionTree,
    RegressionTree,
    TreeParams,
    _check_xy,
    default_mtry,
    fit_tree,
    tree_importance,
)

FOREST_KINDS = ("random_forest", "extra_trees", "gbdt")

HESSIAN_FLOOR = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    """One forest of the cascade roster.

    ``learning_rate`` and ``gbdt_depth`` apply to GBDT only; ``bootstrap``
    applies to random forests only (extremely randomized trees always use
    the full sample).  A GBDT may have zero stages, which degenerates to
    predicting the class prior.
    """

    kind: str
    n_trees: int = 20
    tree_params: TreeParams = field(default_factory=TreeParams)
    bootstrap: bool = True
    learning_rate: float = 0.1
    gbdt_depth: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in FOREST_KINDS:
            raise DataError(
                "forest kind must be one of %s, got %r" % (FOREST_KINDS, self.kind)
            )
        min_trees = 0 if self.kind == "gbdt" else 1
        if self.n_trees < min_trees:
            raise DataError(
                "%s needs at least %d trees, got %d"
                % (self.kind, min_trees, self.n_trees)
            )
        if not 0.0 <= self.learning_rate <= 1.0:
            raise DataError(
                "learning_rate must lie in [0, 1], got %r" % (self.learning_rate,)
            )
        if self.gbdt_depth < 1:
            raise DataError("gbdt_depth must be at least 1")


@dataclass
class ForestModel:
    """Fitted forest of any kind.

    Bagging kinds populate ``trees``; GBDT populates ``init_scores`` /
    ``stages`` / ``training_loss`` (one entry per one-vs-rest submodel;
    binary problems have a single submodel for class 1).  Each submodel's
    loss trace starts with the loss of the initial constant score.
    """

    kind: str
    n_features_in: int
    n_classes: int
    importance: np.ndarray
    trees: list[DecisionTree] = field(default_factory=list)
    init_scores: list[float] = field(default_factory=list)
    stages: list[list[RegressionTree]] = field(default_factory=list)
    training_loss: list[list[float]] = field(default_factory=list)


def _map_ordered(fn, args_list, n_jobs: int) -> list:
    if n_jobs <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, args_list))


def _mean_importance(trees: list[DecisionTree]) -> np.ndarray:
    acc = tree_importance(trees[0]).copy()
    for t in trees[1:]:
        acc += tree_importance(t)
    acc /= len(trees)
    return acc / acc.sum()


def _validate_classes(y: np.ndarray, n_classes: Optional[int]) -> int:
    present = np.unique(y)
    if present.size < 2:
        raise DataError("forest training requires at least two classes")
    if n_classes is None:
        return int(y.max()) + 1
    if y.max() >= n_classes:
        raise DataError("labels exceed n_classes=%d" % n_classes)
    return int(n_classes)


def fit_random_forest(
    features,
    labels,
    config: ForestConfig,
    n_classes: Optional[int] = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Bagged exhaustive-split trees, ``mtry = ceil(sqrt(d))`` by default.

    Each tree draws its bootstrap resample (n draws with replacement,
    represented as integer row multiplicities) and its node streams from
    seeds keyed by ``(config.seed, tree index)``.
    """
    X, y, _ = _check_xy(features, labels, None)
    C = _validate_classes(y, n_classes)
    n, d = X.shape
    mtry = config.tree_params.mtry
    params = replace(
        config.tree_params,
        mtry=default_mtry(d) if mtry is None else mtry,
        split_mode="exhaustive",
    )

    def one_tree(t: int) -> DecisionTree:
        weights = None
        if config.bootstrap:
            rng = np.random.default_rng(derive_seed(config.seed, t, 1))
            draws = rng.integers(0, n, n)
            weights = np.bincount(draws, minlength=n).astype(np.float64)
        p = replace(params, seed=derive_seed(config.seed, t, 0))
        return fit_tree(X, y, p, weights, C)

    trees = _map_ordered(one_tree, list(range(config.n_trees)), n_jobs)
    return ForestModel(
        kind="random_forest",
        n_features_in=d,
        n_classes=C,
        importance=_mean_importance(trees),
        trees=trees,
    )


def fit_extra_trees(
    features,
    labels,
    config: ForestConfig,
    n_classes: Optional[int] = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Extremely randomized trees: full sample, one random threshold per
    candidate feature, ``mtry = ceil(sqrt(d))`` by default."""
    X, y, _ = _check_xy(features, labels, None)
    C = _validate_classes(y, n_classes)
    d = X.shape[1]
    mtry = config.tree_params.mtry
    params = replace(
        config.tree_params,
        mtry=default_mtry(d) if mtry is None else mtry,
        split_mode="random_threshold",
    )

    def one_tree(t: int) -> DecisionTree:
        p = replace(params, seed=derive_seed(config.seed, t, 0))
        return fit_tree(X, y, p, None, C)

    trees = _map_ordered(one_tree, list(range(config.n_trees)), n_jobs)
    return ForestModel(
        kind="extra_trees",
        n_features_in=d,
        n_classes=C,
        importance=_mean_importance(trees),
        trees=trees,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _logloss(y01: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-np.mean(y01 * np.log(p) + (1.0 - y01) * np.log(1.0 - p)))


def fit_gbdt(
    features,
    labels,
    config: ForestConfig,
    n_classes: Optional[int] = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Gradient-boosted depth-limited regression trees on logistic loss.

    The initial score is the training log-odds; every stage fits a
    variance-reduction regression tree to the current negative gradients
    over all features, with Newton leaf values (gradient sum over floored
    hessian sum) scaled by the learning rate.  Multi-class problems train
    one-vs-rest submodels whose sigmoid scores are normalized at predict
    time.
    """
    X, y, _ = _check_xy(features, labels, None)
    C = _validate_classes(y, n_classes)
    d = X.shape[1]
    n = X.shape[0]
    targets = [1] if C == 2 else list(range(C))

    imp_raw = np.zeros(d)
    init_scores: list[float] = []
    stages: list[list[RegressionTree]] = []
    losses: list[list[float]] = []
    for c in targets:
        y01 = (y == c).astype(np.float64)
        prior = float(np.mean(y01))
        init = float(np.log(prior / (1.0 - prior)))
        score = np.full(n, init)
        sub_stages: list[RegressionTree] = []
        sub_loss = [_logloss(y01, _sigmoid(score))]
        for _ in range(config.n_trees):
            p = _sigmoid(score)
            residual = y01 - p
            hessian = p * (1.0 - p)
            feature, threshold, left, right, leaf_value, raw = (
                backend.build_regression_tree(
                    X,
                    residual,
                    hessian,
                    int(config.gbdt_depth),
                    int(config.tree_params.min_samples_leaf),
                    int(config.tree_params.min_samples_split),
                    HESSIAN_FLOOR,
                )
            )
            tree = RegressionTree(
                n_features_in=d,
                feature=feature,
                threshold=threshold,
                left=left,
                right=right,
                leaf_value=leaf_value * config.learning_rate,
                importance_raw=raw,
            )
            leaves = backend.route_samples(X, feature, threshold, left, right)
            score = score + tree.leaf_value[leaves]
            sub_stages.append(tree)
            sub_loss.append(_logloss(y01, _sigmoid(score)))
            imp_raw += raw
        init_scores.append(init)
        stages.append(sub_stages)
        losses.append(sub_loss)

    total = imp_raw.sum()
    importance = imp_raw / total if total > 0 else np.full(d, 1.0 / d)
    return ForestModel(
        kind="gbdt",
        n_features_in=d,
        n_classes=C,
        importance=importance,
        init_scores=init_scores,
        stages=stages,
        training_loss=losses,
    )


def fit_forest(
    features,
    labels,
    config: ForestConfig,
    n_classes: Optional[int] = None,
    n_jobs: int = 1,
) -> ForestModel:
    """Dispatch to the fitter for ``config.kind``."""
    if config.kind == "random_forest":
        return fit_random_forest(features, labels, config, n_classes, n_jobs)
    if config.kind == "extra_trees":
        return fit_extra_trees(features, labels, config, n_classes, n_jobs)
    return fit_gbdt(features, labels, config, n_classes, n_jobs)


def _gbdt_scores(model: ForestModel, X: np.ndarray) -> np.ndarray:
    out = np.empty((X.shape[0], len(model.init_scores)))
    for j, (init, sub_stages) in enumerate(zip(model.init_scores, model.stages)):
        score = np.full(X.shape[0], init)
        for tree in sub_stages:
            leaves = backend.route_samples(
                X, tree.feature, tree.threshold, tree.left, tree.right
            )
            score = score + tree.leaf_value[leaves]
        out[:, j] = score
    return out


def forest_predict_proba(model: ForestModel, features) -> np.ndarray:
    """Class probabilities, one row per sample, rows summing to one.

    Bagging kinds average the per-tree leaf distributions; GBDT applies
    the sigmoid to summed stage scores (binary) or normalizes the
    one-vs-rest sigmoids (multi-class).
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features_in:
        raise DimensionError(
            "forest fitted for %d features, got %s"
            % (model.n_features_in, "x".join(map(str, np.shape(features))))
        )
    if model.kind == "gbdt":
        scores = _gbdt_scores(model, X)
        if model.n_classes == 2:
            p1 = _sigmoid(scores[:, 0])
            return np.column_stack([1.0 - p1, p1])
        sig = _sigmoid(scores)
        return sig / sig.sum(axis=1, keepdims=True)
    acc = np.zeros((X.shape[0], model.n_classes))
    for tree in model.trees:
        leaves = backend.route_samples(
            X, tree.feature, tree.threshold, tree.left, tree.right
        )
        acc += tree.leaf_dist[leaves]
    return acc / len(model.trees)


def forest_importance(model: ForestModel) -> np.ndarray:
    """Normalized per-feature importance of a fitted forest."""
    return model.importance
