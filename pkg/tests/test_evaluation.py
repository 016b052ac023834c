"""Metrics, ROC/AUC, logistic-regression baseline, and the CV protocol."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from afsdf.cascade import CascadeConfig
from afsdf.errors import DataError, DimensionError, MetricError
from afsdf.evaluation import (
    ConfusionMatrix,
    LogregSpec,
    acc,
    confusion,
    crossval_evaluate,
    fit_logreg,
    logreg_loss_grad,
    logreg_predict_proba,
    roc_auc,
    sen,
    spe,
)
from afsdf.forest import ForestConfig


def pairwise_auc(scores, labels) -> Fraction:
    """Exact tie-aware probability that a positive outranks a negative."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = Fraction(0)
    for p in pos:
        for n in neg:
            if p > n:
                total += 1
            elif p == n:
                total += Fraction(1, 2)
    return total / (len(pos) * len(neg))


class TestConfusion:
    def test_counts(self):
        y = np.array([1, 1, 0, 0, 1, 0])
        p = np.array([1, 0, 0, 1, 1, 0])
        cm = confusion(y, p)
        assert (cm.tp, cm.fn, cm.fp, cm.tn) == (2, 1, 1, 2)
        assert cm.total == 6

    def test_positive_class_zero_swaps_roles(self):
        y = np.array([1, 1, 0, 0, 1, 0])
        p = np.array([1, 0, 0, 1, 1, 0])
        cm = confusion(y, p, positive_class=0)
        assert (cm.tp, cm.fn, cm.fp, cm.tn) == (2, 1, 1, 2)
        assert cm.tp == np.sum((y == 0) & (p == 0))

    def test_errors(self):
        with pytest.raises(DimensionError):
            confusion([0, 1], [0])
        with pytest.raises(MetricError):
            confusion([0, 2], [0, 1])
        with pytest.raises(MetricError):
            confusion([0, 1], [0, 1], positive_class=3)


class TestScalarMetrics:
    def test_formulas(self):
        cm = ConfusionMatrix(tp=8, tn=5, fp=3, fn=4)
        assert acc(cm) == pytest.approx(13 / 20)
        assert sen(cm) == pytest.approx(8 / 12)
        assert spe(cm) == pytest.approx(5 / 8)

    def test_undefined_cases(self):
        with pytest.raises(MetricError, match="no positive"):
            sen(ConfusionMatrix(tp=0, tn=3, fp=2, fn=0))
        with pytest.raises(MetricError, match="no negative"):
            spe(ConfusionMatrix(tp=3, tn=0, fp=0, fn=2))
        with pytest.raises(MetricError):
            acc(ConfusionMatrix(tp=0, tn=0, fp=0, fn=0))


class TestRocAuc:
    def test_perfect_and_inverted(self):
        labels = np.array([0, 0, 1, 1])
        assert roc_auc(np.array([0.1, 0.2, 0.8, 0.9]), labels).auc == 1.0
        assert roc_auc(np.array([0.9, 0.8, 0.2, 0.1]), labels).auc == 0.0

    def test_all_tied_scores_give_half(self):
        curve = roc_auc(np.full(6, 0.5), np.array([0, 1, 0, 1, 0, 1]))
        assert curve.auc == pytest.approx(0.5)
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)

    def test_curve_is_monotone_with_unit_endpoints(self):
        rng = np.random.default_rng(4)
        scores = rng.normal(size=40)
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]  # both classes present
        curve = roc_auc(scores, labels)
        pts = np.array(curve.points)
        assert tuple(pts[0]) == (0.0, 0.0)
        assert tuple(pts[-1]) == (1.0, 1.0)
        assert (np.diff(pts[:, 0]) >= 0).all()
        assert (np.diff(pts[:, 1]) >= 0).all()

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            n = int(rng.integers(4, 30))
            scores = rng.integers(0, 5, size=n).astype(float)  # heavy ties
            labels = rng.integers(0, 2, size=n)
            labels[:2] = [0, 1]
            expected = pairwise_auc(scores.tolist(), labels.tolist())
            assert abs(roc_auc(scores, labels).auc - float(expected)) < 1e-12

    def test_flip_symmetry(self):
        rng = np.random.default_rng(5)
        scores = rng.normal(size=30)
        labels = rng.integers(0, 2, size=30)
        labels[:2] = [0, 1]
        a = roc_auc(scores, labels).auc
        b = roc_auc(-scores, labels).auc
        assert a + b == pytest.approx(1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(MetricError):
            roc_auc(np.array([0.1, 0.2]), np.array([1, 1]))  # one class
        with pytest.raises(MetricError):
            roc_auc(np.array([0.1, 0.2]), np.array([0, 2]))
        with pytest.raises(DataError):
            roc_auc(np.array([np.nan, 0.2]), np.array([0, 1]))
        with pytest.raises(DimensionError):
            roc_auc(np.array([0.1, 0.2, 0.3]), np.array([0, 1]))


class TestLogreg:
    def test_spec_validation(self):
        with pytest.raises(DataError):
            LogregSpec(l2=-0.1)
        with pytest.raises(DataError):
            LogregSpec(max_iters=-1)
        LogregSpec(max_iters=0)  # zero iterations = predict the prior
        with pytest.raises(DataError):
            LogregSpec(tolerance=0.0)

    def test_loss_at_zero_params_is_log2(self):
        X = np.random.default_rng(0).normal(size=(12, 3))
        y = np.array([0, 1] * 6)
        loss, grad = logreg_loss_grad(np.zeros(4), X, y, l2=0.0)
        assert loss == pytest.approx(np.log(2.0), abs=1e-12)
        assert grad.shape == (4,)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 4))
        y = rng.integers(0, 2, size=20)
        params = rng.normal(size=5) * 0.5
        loss, grad = logreg_loss_grad(params, X, y, l2=0.05)
        eps = 1e-6
        for i in range(5):
            bump = params.copy()
            bump[i] += eps
            up, _ = logreg_loss_grad(bump, X, y, l2=0.05)
            bump[i] -= 2 * eps
            down, _ = logreg_loss_grad(bump, X, y, l2=0.05)
            numeric = (up - down) / (2 * eps)
            assert abs(numeric - grad[i]) < 1e-4 * max(1.0, abs(grad[i]))

    def test_separable_data_learns(self):
        rng = np.random.default_rng(7)
        X = np.vstack([rng.normal(-2, 0.3, (30, 2)), rng.normal(2, 0.3, (30, 2))])
        y = np.array([0] * 30 + [1] * 30)
        model = fit_logreg(X, y)
        proba = logreg_predict_proba(model, X)
        assert proba.shape == (60, 2)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
        assert (np.argmax(proba, axis=1) == y).all()
        assert model.n_iters > 0

    def test_stronger_l2_shrinks_weights(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(80, 3))
        y = (X[:, 0] + 0.3 * rng.normal(size=80) > 0).astype(int)
        loose = fit_logreg(X, y, l2=0.001)
        tight = fit_logreg(X, y, l2=1.0)
        assert np.linalg.norm(tight.weights) < np.linalg.norm(loose.weights)

    def test_zero_information_predicts_prior(self):
        X = np.zeros((10, 2))
        y = np.array([0, 1] * 5)
        model = fit_logreg(X, y)
        proba = logreg_predict_proba(model, X)
        np.testing.assert_allclose(proba[:, 1], 0.5, atol=1e-6)


class TestCrossval:
    def test_report_layout(self, small_binary_data):
        rep = crossval_evaluate(
            small_binary_data, LogregSpec(), k=4, seed=1
        )
        assert rep.k == 4
        assert len(rep.per_fold) == 4
        assert [fm.fold for fm in rep.per_fold] == [0, 1, 2, 3]
        for name in ("acc", "sen", "spe", "auc"):
            vals = np.array([getattr(fm, name) for fm in rep.per_fold])
            assert rep.mean[name] == pytest.approx(vals.mean())
            assert rep.std[name] == pytest.approx(vals.std())  # population
        assert rep.pooled_scores.shape == (small_binary_data.n_samples,)
        np.testing.assert_array_equal(rep.pooled_labels, small_binary_data.labels)
        d = rep.per_fold[0].as_dict()
        assert set(d) == {"acc", "sen", "spe", "auc"}

    def test_deterministic_per_seed(self, small_binary_data):
        a = crossval_evaluate(small_binary_data, LogregSpec(), k=3, seed=5)
        b = crossval_evaluate(small_binary_data, LogregSpec(), k=3, seed=5)
        c = crossval_evaluate(small_binary_data, LogregSpec(), k=3, seed=6)
        assert a.mean == b.mean
        np.testing.assert_array_equal(a.pooled_scores, b.pooled_scores)
        assert a.mean != c.mean

    def test_forest_spec(self, small_binary_data):
        rep = crossval_evaluate(
            small_binary_data,
            ForestConfig(kind="random_forest", n_trees=10),
            k=3,
            seed=2,
            n_jobs=2,
        )
        assert rep.mean["acc"] > 0.8

    def test_cascade_spec(self, small_binary_data, mini_roster):
        cfg = CascadeConfig(forest_configs=mini_roster, max_layers=1, seed=0)
        rep = crossval_evaluate(small_binary_data, cfg, k=3, seed=2, n_jobs=4)
        assert rep.mean["acc"] > 0.8
        assert all(0.0 <= fm.auc <= 1.0 for fm in rep.per_fold)

    def test_positive_class_zero(self, small_binary_data):
        rep0 = crossval_evaluate(small_binary_data, LogregSpec(), k=3, seed=1,
                                 positive_class=0)
        rep1 = crossval_evaluate(small_binary_data, LogregSpec(), k=3, seed=1)
        # Swapping the positive class swaps the roles of SEN and SPE.
        assert rep0.mean["sen"] == pytest.approx(rep1.mean["spe"])
        assert rep0.mean["spe"] == pytest.approx(rep1.mean["sen"])
        assert rep0.mean["acc"] == pytest.approx(rep1.mean["acc"])
        np.testing.assert_array_equal(rep0.pooled_labels, 1 - rep1.pooled_labels)

    def test_rejects_multiclass_and_bad_positive(self, three_class_data,
                                                 small_binary_data):
        with pytest.raises(MetricError):
            crossval_evaluate(three_class_data, LogregSpec(), k=3)
        with pytest.raises(MetricError):
            crossval_evaluate(small_binary_data, LogregSpec(), k=3,
                              positive_class=2)
