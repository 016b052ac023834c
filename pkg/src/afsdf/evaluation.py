"""Binary classification metrics, ROC/AUC, the outer cross-validation
protocol, and a logistic-regression baseline.

Accuracy, sensitivity, and specificity are the standard confusion-matrix
ratios; AUC is trapezoidal over thresholds at distinct scores, which
equals the tie-aware Mann-Whitney statistic (ties credited 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from ._rng import derive_seed
from .cascade import CascadeConfig, cascade_predict_proba, fit_cascade
from .dataset import Dataset, standardize_apply, standardize_fit, stratified_folds
from .errors import DataError, DimensionError, MetricError
from .forest import ForestConfig, fit_forest, forest_predict_proba

_CV_STREAM = 0xC5F01D

METRIC_NAMES = ("acc", "sen", "spe", "auc")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(labels, predictions, positive_class: int = 1) -> ConfusionMatrix:
    """Count true/false positives/negatives for a binary task.

    ``positive_class`` selects which of the two class indices counts as
    positive (default: class index 1).
    """
    y = np.asarray(labels, dtype=np.int64)
    p = np.asarray(predictions, dtype=np.int64)
    if y.ndim != 1 or p.ndim != 1:
        raise DataError("labels and predictions must be 1-d vectors")
    if y.shape != p.shape:
        raise DimensionError(
            "labels length %d does not match predictions length %d" % (y.size, p.size)
        )
    if y.size == 0:
        raise DataError("at least one sample is required")
    values = np.union1d(np.unique(y), np.unique(p))
    if values.min() < 0 or values.max() > 1:
        raise MetricError(
            "confusion counting requires binary class indices 0/1, saw %s"
            % values.tolist()
        )
    if positive_class not in (0, 1):
        raise MetricError("positive_class must be 0 or 1")
    pos = y == positive_class
    pred_pos = p == positive_class
    return ConfusionMatrix(
        tp=int(np.count_nonzero(pos & pred_pos)),
        tn=int(np.count_nonzero(~pos & ~pred_pos)),
        fp=int(np.count_nonzero(~pos & pred_pos)),
        fn=int(np.count_nonzero(pos & ~pred_pos)),
    )


def acc(cm: ConfusionMatrix) -> float:
    """(TP + TN) / (TP + TN + FP + FN)."""
    if cm.total <= 0:
        raise MetricError("accuracy undefined: empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def sen(cm: ConfusionMatrix) -> float:
    """TP / (TP + FN); undefined without positive samples."""
    if cm.tp + cm.fn <= 0:
        raise MetricError("sensitivity undefined: no positive samples")
    return cm.tp / (cm.tp + cm.fn)


def spe(cm: ConfusionMatrix) -> float:
    """TN / (TN + FP); undefined without negative samples."""
    if cm.tn + cm.fp <= 0:
        raise MetricError("specificity undefined: no negative samples")
    return cm.tn / (cm.tn + cm.fp)


@dataclass(frozen=True)
class RocCurve:
    """ROC points ordered by descending threshold, plus the trapezoid AUC.

    The first point is (0, 0) and the last (1, 1); both coordinates are
    non-decreasing along the curve.
    """

    points: tuple[tuple[float, float], ...]
    auc: float


def roc_auc(scores, labels) -> RocCurve:
    """ROC curve from thresholds at the distinct scores.

    Tied scores move the curve diagonally in one step, so the trapezoid
    area equals the Mann-Whitney statistic with ties counted half.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.ndim != 1 or y.ndim != 1:
        raise DataError("scores and labels must be 1-d vectors")
    if s.shape != y.shape:
        raise DimensionError(
            "scores length %d does not match labels length %d" % (s.size, y.size)
        )
    if not np.isfinite(s).all():
        raise DataError("scores must be finite")
    values = np.unique(y)
    if values.min() < 0 or values.max() > 1:
        raise MetricError("roc_auc requires binary class indices 0/1")
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("roc_auc requires both classes present")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    points = [(0.0, 0.0)]
    area = 0.0
    tp = fp = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            j += 1
        block = y_sorted[i:j]
        tp += int(np.count_nonzero(block == 1))
        fp += block.size - int(np.count_nonzero(block == 1))
        fpr = fp / n_neg
        tpr = tp / n_pos
        prev_fpr, prev_tpr = points[-1]
        area += 0.5 * (tpr + prev_tpr) * (fpr - prev_fpr)
        points.append((fpr, tpr))
        i = j
    return RocCurve(points=tuple(points), auc=area)


@dataclass(frozen=True)
class LogregSpec:
    """Hyperparameters of the logistic-regression baseline."""

    l2: float = 0.01
    max_iters: int = 500
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if self.l2 < 0:
            raise DataError("l2 must be non-negative")
        if self.max_iters < 0:
            raise DataError("max_iters must be non-negative")
        if self.tolerance <= 0:
            raise DataError("tolerance must be positive")


@dataclass
class LogregModel:
    """Binary logistic regression: p(class 1) = sigmoid(x @ weights + intercept)."""

    weights: np.ndarray
    intercept: float
    n_iters: int
    converged: bool


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def logreg_loss_grad(
    params: np.ndarray, features: np.ndarray, targets01: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Loss and gradient at ``params = [intercept, weights...]``.

    Loss is mean log-loss plus ``l2/2 * ||weights||^2`` (the intercept is
    not penalized).  Exposed so the analytic gradient can be checked
    against finite differences.
    """
    b = params[0]
    w = params[1:]
    p = _sigmoid(features @ w + b)
    pc = np.clip(p, 1e-12, 1.0 - 1e-12)
    loss = float(
        -np.mean(targets01 * np.log(pc) + (1.0 - targets01) * np.log(1.0 - pc))
    )
    loss += 0.5 * l2 * float(w @ w)
    resid = p - targets01
    grad = np.empty_like(params)
    grad[0] = float(np.mean(resid))
    grad[1:] = features.T @ resid / features.shape[0] + l2 * w
    return loss, grad


def fit_logreg(
    features,
    labels,
    l2: float = 0.01,
    max_iters: int = 500,
    tolerance: float = 1e-6,
) -> LogregModel:
    """Full-batch gradient descent with backtracking line search.

    Parameters start at zero, so ``max_iters=0`` yields the constant 0.5
    predictor.  Iteration stops when the gradient's infinity norm drops
    below ``tolerance`` or the iteration budget runs out.
    """
    X = np.ascontiguousarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("features must be a 2-d matrix")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise DimensionError(
            "labels length %d does not match %d rows" % (y.size, X.shape[0])
        )
    values = np.unique(y)
    if values.size != 2 or values.min() < 0 or values.max() > 1:
        raise MetricError("logistic regression requires binary class indices 0/1")
    y01 = y.astype(np.float64)

    params = np.zeros(X.shape[1] + 1)
    converged = False
    steps = 0
    while steps < max_iters:
        loss, grad = logreg_loss_grad(params, X, y01, l2)
        if float(np.max(np.abs(grad))) < tolerance:
            converged = True
            break
        gsq = float(grad @ grad)
        step = 1.0
        for _ in range(60):
            cand_loss, _ = logreg_loss_grad(params - step * grad, X, y01, l2)
            if cand_loss <= loss - 1e-4 * step * gsq:
                break
            step *= 0.5
        params = params - step * grad
        steps += 1
    return LogregModel(
        weights=params[1:].copy(),
        intercept=float(params[0]),
        n_iters=steps,
        converged=converged,
    )


def logreg_predict_proba(model: LogregModel, samples) -> np.ndarray:
    """Two-column probability matrix [p(class 0), p(class 1)]."""
    X = np.ascontiguousarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.size:
        raise DimensionError(
            "model fitted for %d features, got %s"
            % (model.weights.size, "x".join(map(str, np.shape(samples))))
        )
    p1 = _sigmoid(X @ model.weights + model.intercept)
    return np.column_stack([1.0 - p1, p1])


ModelSpec = Union[CascadeConfig, ForestConfig, LogregSpec]


@dataclass(frozen=True)
class FoldMetrics:
    """Held-out metrics of one outer fold."""

    fold: int
    acc: float
    sen: float
    spe: float
    auc: float

    def as_dict(self) -> dict[str, float]:
        return {"acc": self.acc, "sen": self.sen, "spe": self.spe, "auc": self.auc}


@dataclass
class CvReport:
    """Per-fold metrics with mean and population standard deviation.

    ``pooled_scores`` holds each sample's held-out positive-class score in
    original row order (every row is scored exactly once) and
    ``pooled_labels`` the matching positive-class indicator; together they
    draw the pooled ROC curve.
    """

    k: int
    per_fold: list[FoldMetrics]
    mean: dict[str, float]
    std: dict[str, float]
    pooled_scores: np.ndarray
    pooled_labels: np.ndarray


def _fold_proba(
    data: Dataset,
    spec: ModelSpec,
    train_idx: np.ndarray,
    test_idx: np.ndarray,
    fold_seed: int,
    n_jobs: int,
) -> np.ndarray:
    """Fit the spec'd model on the training rows, return held-out probas.

    Cascades receive raw features (they standardize internally); the flat
    models get features standardized on the training portion.
    """
    if isinstance(spec, CascadeConfig):
        sub = data.subset(train_idx)
        model = fit_cascade(sub, replace(spec, seed=fold_seed), n_jobs=n_jobs)
        return cascade_predict_proba(model, data.features[test_idx])
    stats = standardize_fit(data.features[train_idx])
    Ztr = standardize_apply(stats, data.features[train_idx])
    Zte = standardize_apply(stats, data.features[test_idx])
    if isinstance(spec, ForestConfig):
        model = fit_forest(
            Ztr, data.labels[train_idx], replace(spec, seed=fold_seed),
            data.n_classes, n_jobs,
        )
        return forest_predict_proba(model, Zte)
    if isinstance(spec, LogregSpec):
        model = fit_logreg(
            Ztr, data.labels[train_idx], spec.l2, spec.max_iters, spec.tolerance
        )
        return logreg_predict_proba(model, Zte)
    raise DataError("unsupported model spec %r" % (type(spec).__name__,))


def crossval_evaluate(
    data: Dataset,
    model_spec: ModelSpec,
    k: int = 5,
    seed: int = 0,
    n_jobs: int = 1,
    positive_class: int = 1,
) -> CvReport:
    """Stratified k-fold protocol: fit on k-1 folds, score the held-out fold.

    Each fold refits from scratch with a fold-derived seed; the report
    carries per-fold accuracy/sensitivity/specificity/AUC and their mean
    and population standard deviation.  Binary tasks only.
    """
    if data.n_classes != 2:
        raise MetricError(
            "cross-validation reporting requires a binary task, got %d classes"
            % data.n_classes
        )
    if positive_class not in (0, 1):
        raise MetricError("positive_class must be 0 or 1")
    folds = stratified_folds(data.labels, k, derive_seed(seed, _CV_STREAM))
    pooled = np.empty(data.n_samples)
    per_fold: list[FoldMetrics] = []
    for j in range(k):
        train_idx, test_idx = folds.train_test(j)
        proba = _fold_proba(
            data, model_spec, train_idx, test_idx, derive_seed(seed, j), n_jobs
        )
        preds = np.argmax(proba, axis=1)
        y_test = data.labels[test_idx]
        cm = confusion(y_test, preds, positive_class)
        scores = proba[:, positive_class]
        pooled[test_idx] = scores
        per_fold.append(
            FoldMetrics(
                fold=j,
                acc=acc(cm),
                sen=sen(cm),
                spe=spe(cm),
                auc=roc_auc(scores, (y_test == positive_class).astype(np.int64)).auc,
            )
        )
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(fm, name) for fm in per_fold])
        mean[name] = float(vals.mean())
        std[name] = float(vals.std())
    return CvReport(
        k=k,
        per_fold=per_fold,
        mean=mean,
        std=std,
        pooled_scores=pooled,
        pooled_labels=(data.labels == positive_class).astype(np.int64),
    )
