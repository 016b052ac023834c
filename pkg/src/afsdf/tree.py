"""CART-style decision trees with deterministic, stream-keyed randomness.

Splits minimize weighted Gini impurity (exhaustive midpoint scan) or
evaluate one uniformly drawn threshold per candidate feature
(``random_threshold`` mode, used by extremely randomized trees).  Ties are
broken toward the lowest feature index, then the lowest threshold.  Rows
route left when ``value <= threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import backend
from .errors import DataError, DimensionError

SPLIT_MODES = ("exhaustive", "random_threshold")


@dataclass(frozen=True)
class TreeParams:
    """Construction limits and randomness controls for one tree.

    ``mtry=None`` means "consider every feature"; in exhaustive mode that
    makes the tree fully deterministic regardless of ``seed``.
    ``min_samples_leaf``/``min_samples_split`` count total sample weight.
    """

    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2
    mtry: Optional[int] = None
    split_mode: str = "exhaustive"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 1:
            raise DataError("max_depth must be at least 1 (or None for unbounded)")
        if self.min_samples_leaf < 1:
            raise DataError("min_samples_leaf must be at least 1")
        if self.min_samples_split < 2:
            raise DataError("min_samples_split must be at least 2")
        if self.mtry is not None and self.mtry < 1:
            raise DataError("mtry must be at least 1")
        if self.split_mode not in SPLIT_MODES:
            raise DataError(
                "split_mode must be one of %s, got %r" % (SPLIT_MODES, self.split_mode)
            )


@dataclass
class DecisionTree:
    """Fitted classification tree as flat preorder node arrays.

    ``feature[i] == -1`` marks a leaf; leaf rows of ``leaf_dist`` hold the
    weighted class frequency distribution, internal rows are zero.
    ``importance_raw`` accumulates per-feature weighted impurity decrease
    (weights normalized by total sample weight).
    """

    n_features_in: int
    n_classes: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_dist: np.ndarray
    importance_raw: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])


@dataclass
class RegressionTree:
    """Fitted regression tree (boosting stage); leaves hold scalar values."""

    n_features_in: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_value: np.ndarray
    importance_raw: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])


class SplitResult(NamedTuple):
    feature: int
    threshold: float
    gain: float


def gini_impurity(class_counts) -> float:
    """Gini impurity ``1 - sum(p_c^2)`` of a non-negative count vector."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise DataError("class_counts must be a non-empty 1-d vector")
    if (counts < 0).any():
        raise DataError("class_counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise DataError("class_counts are all zero")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _check_xy(features, labels, sample_weights):
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("features must be a 2-d array")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise DimensionError(
            "labels length %d does not match %d rows" % (y.size, X.shape[0])
        )
    if X.shape[0] == 0:
        raise DataError("at least one sample is required")
    if y.min() < 0:
        raise DataError("labels must be non-negative class indices")
    if sample_weights is None:
        w = np.ones(X.shape[0], dtype=np.float64)
    else:
        w = np.ascontiguousarray(sample_weights, dtype=np.float64)
        if w.shape != (X.shape[0],):
            raise DimensionError(
                "sample_weights length %d does not match %d rows"
                % (w.size, X.shape[0])
            )
        if (w < 0).any():
            raise DataError("sample_weights must be non-negative")
        if not (w > 0).any():
            raise DataError("at least one sample weight must be positive")
    return X, y, w


def _resolve_mtry(params: TreeParams, d: int) -> int:
    if params.mtry is None:
        return d
    if params.mtry > d:
        raise DataError("mtry=%d exceeds %d features" % (params.mtry, d))
    return params.mtry


def fit_tree(
    features,
    labels,
    params: TreeParams,
    sample_weights=None,
    n_classes: Optional[int] = None,
) -> DecisionTree:
    """Fit one classification tree.

    Candidate-feature subsampling and random thresholds are drawn from a
    stream keyed by ``(params.seed, preorder node index)``, so refitting on
    identical inputs reproduces the tree exactly, and in exhaustive mode
    the tree is invariant to row order.
    """
    X, y, w = _check_xy(features, labels, sample_weights)
    d = X.shape[1]
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.max() >= n_classes:
        raise DataError("labels exceed n_classes=%d" % n_classes)
    mtry = _resolve_mtry(params, d)
    mode = backend.SPLIT_EXHAUSTIVE
    if params.split_mode == "random_threshold":
        mode = backend.SPLIT_RANDOM_THRESHOLD
    feature, threshold, left, right, leaf_counts, imp, root_weight = (
        backend.build_classification_tree(
            X,
            y,
            w,
            int(n_classes),
            -1 if params.max_depth is None else int(params.max_depth),
            int(params.min_samples_leaf),
            int(params.min_samples_split),
            int(mtry),
            int(mode),
            params.seed & ((1 << 64) - 1),
        )
    )
    return DecisionTree(
        n_features_in=d,
        n_classes=int(n_classes),
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        leaf_dist=_normalize_leaves(feature, leaf_counts),
        importance_raw=imp / root_weight,
    )


def _normalize_leaves(feature: np.ndarray, leaf_counts: np.ndarray) -> np.ndarray:
    dist = np.zeros_like(leaf_counts)
    leaves = np.flatnonzero(feature < 0)
    sums = leaf_counts[leaves].sum(axis=1)
    dist[leaves] = leaf_counts[leaves] / sums[:, None]
    return dist


def best_split(
    features,
    labels,
    candidate_features,
    params: TreeParams,
    sample_weights=None,
) -> Optional[SplitResult]:
    """Best single split over the given candidate features, or None.

    Returns the split maximizing weighted Gini decrease (its ``gain``),
    honoring ``params.min_samples_leaf``/``min_samples_split``; ``None``
    when no candidate yields strictly positive gain.  Random-threshold
    draws come from the stream keyed by ``(params.seed, 0)``.
    """
    X, y, w = _check_xy(features, labels, sample_weights)
    d = X.shape[1]
    cand = np.unique(np.asarray(candidate_features, dtype=np.int32))
    if cand.size == 0:
        raise DataError("candidate_features is empty")
    if cand.min() < 0 or cand.max() >= d:
        raise DataError("candidate_features out of range for %d features" % d)
    n_classes = int(y.max()) + 1
    mode = backend.SPLIT_EXHAUSTIVE
    if params.split_mode == "random_threshold":
        mode = backend.SPLIT_RANDOM_THRESHOLD
    feature, threshold, _, _, _, imp, root_weight = (
        backend.build_classification_tree(
            X,
            y,
            w,
            n_classes,
            1,
            int(params.min_samples_leaf),
            int(params.min_samples_split),
            int(cand.size),
            int(mode),
            params.seed & ((1 << 64) - 1),
            cand,
        )
    )
    if feature[0] < 0:
        return None
    f = int(feature[0])
    return SplitResult(f, float(threshold[0]), float(imp[f] / root_weight))


def tree_predict_proba(tree: DecisionTree, features) -> np.ndarray:
    """Class distribution of the leaf each sample lands in.

    A single 1-d sample yields a 1-d distribution; a matrix yields one row
    per sample.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != tree.n_features_in:
        raise DimensionError(
            "tree fitted for %d features, got %d"
            % (tree.n_features_in, X.shape[1] if X.ndim == 2 else -1)
        )
    leaves = backend.route_samples(X, tree.feature, tree.threshold, tree.left, tree.right)
    out = tree.leaf_dist[leaves]
    return out[0] if single else out


def tree_importance(tree: DecisionTree) -> np.ndarray:
    """Normalized impurity-decrease importance; uniform when no split exists."""
    raw = tree.importance_raw
    total = raw.sum()
    if total <= 0:
        return np.full(tree.n_features_in, 1.0 / tree.n_features_in)
    return raw / total


def default_mtry(n_features: int) -> int:
    """Forest default: ``ceil(sqrt(n_features))``."""
    return int(math.ceil(math.sqrt(n_features)))
