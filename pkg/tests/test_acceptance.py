"""Release gate: one timed, independently-oracled check per shipping claim.

Each test prints exactly one ``[PASS]``/``[FAIL]`` line (with elapsed time)
straight to the terminal, bypassing pytest's capture, and re-raises on
failure.  Heavy shared artifacts are built lazily and billed to the first
test that needs them.
"""

from __future__ import annotations

import sys
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from afsdf._rng import derive_seed
from afsdf.cascade import (
    CascadeConfig,
    aggregate_importance,
    cascade_predict_label,
    cascade_predict_proba,
    cascade_transform,
    fit_cascade,
    surviving_original_features,
)
from afsdf.dataset import (
    SyntheticSpec,
    standardize_apply,
    standardize_fit,
    stratified_folds,
    synth_generate,
)
from afsdf.errors import MetricError
from afsdf.evaluation import (
    ConfusionMatrix,
    acc,
    fit_logreg,
    logreg_loss_grad,
    logreg_predict_proba,
    roc_auc,
    sen,
    spe,
)
from afsdf.forest import ForestConfig, fit_forest, fit_gbdt, forest_predict_proba
from afsdf.persistence import load_model, save_model
from afsdf.tree import TreeParams, best_split

NJOBS = 4
_CACHE: dict = {}
_CAPMAN = None


@pytest.fixture(autouse=True)
def _grab_capture_manager(request):
    """Remember pytest's capture manager so pass/fail lines reach the
    terminal even while output capture is active."""
    global _CAPMAN
    _CAPMAN = request.config.pluginmanager.getplugin("capturemanager")
    yield


@contextmanager
def criterion(description: str, budget_s: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        _line(False, description, time.perf_counter() - start)
        raise
    elapsed = time.perf_counter() - start
    _line(elapsed < budget_s, description, elapsed)
    if elapsed >= budget_s:
        raise AssertionError(
            "%s finished in %.2fs, budget %.0fs" % (description, elapsed, budget_s)
        )


def _line(ok: bool, description: str, elapsed: float) -> None:
    msg = "[%s] %s (%.2fs)\n" % ("PASS" if ok else "FAIL", description, elapsed)
    if _CAPMAN is not None:
        with _CAPMAN.global_and_fixture_disabled():
            sys.stdout.write(msg)
            sys.stdout.flush()
    else:
        sys.stdout.write(msg)
        sys.stdout.flush()


# ----------------------------------------------------------------------
# shared artifacts (built lazily so their cost lands on the consumer)
# ----------------------------------------------------------------------


def _small_models():
    """Two quick cascades (binary and 3-class) for exactness/persistence."""
    if "small" not in _CACHE:
        roster = (
            ForestConfig(kind="gbdt", n_trees=4),
            ForestConfig(kind="random_forest", n_trees=4),
            ForestConfig(kind="extra_trees", n_trees=4),
        )
        cfg = CascadeConfig(
            forest_configs=roster, min_features=6, max_layers=2, seed=5
        )
        binary = synth_generate(
            SyntheticSpec(n_samples=200, n_informative=4, n_redundant=3,
                          n_noise=5, seed=21)
        )
        rng = np.random.default_rng(33)
        X3 = rng.normal(size=(180, 9))
        y3 = np.repeat(np.arange(3), 60)
        X3[y3 == 1, 0] += 2.5
        X3[y3 == 2, 1] -= 2.5
        from afsdf.dataset import Dataset

        three = Dataset(
            features=X3,
            labels=y3,
            feature_names=["c%d" % i for i in range(9)],
            class_names=["a", "b", "c"],
        )
        _CACHE["small"] = [
            (binary, fit_cascade(binary, cfg, n_jobs=NJOBS)),
            (three, fit_cascade(three, cfg, n_jobs=NJOBS)),
        ]
    return _CACHE["small"]


def _standard_archives(tmp_root):
    """Three archives of the same standard-fixture model: two single-thread
    runs and one multi-thread run."""
    if "standard" not in _CACHE:
        data = synth_generate(SyntheticSpec())  # n=500, d=50
        config = CascadeConfig()
        paths = []
        for tag, jobs in (("a", 1), ("b", 1), ("c", NJOBS)):
            model = fit_cascade(data, config, n_jobs=jobs)
            path = tmp_root / ("standard_%s.json" % tag)
            save_model(model, path)
            paths.append(path)
        _CACHE["standard"] = (data, model, paths)
    return _CACHE["standard"]


def _ablation_corpus():
    """5-fold CV accuracies for four model families on ten synthetic
    datasets, plus one full-data cascade per dataset."""
    if "ablation" in _CACHE:
        return _CACHE["ablation"]
    rows = []
    for s in range(10):
        data = synth_generate(SyntheticSpec(n_samples=600, seed=s))
        folds = stratified_folds(data.labels, 5, derive_seed(s, 0xAB7))
        accs: dict[str, list[float]] = {
            "afs": [], "df": [], "rf": [], "lr_raw": [], "lr_deep": []
        }
        for j in range(folds.k):
            tr, te = folds.train_test(j)
            fold_seed = derive_seed(s, j)
            sub = data.subset(tr)
            Xte, yte = data.features[te], data.labels[te]

            afs = fit_cascade(sub, CascadeConfig(seed=fold_seed), n_jobs=NJOBS)
            accs["afs"].append(
                float(np.mean(cascade_predict_label(afs, Xte) == yte))
            )
            df = fit_cascade(
                sub, CascadeConfig(discard_ratio=0.0, seed=fold_seed),
                n_jobs=NJOBS,
            )
            accs["df"].append(
                float(np.mean(cascade_predict_label(df, Xte) == yte))
            )

            stats = standardize_fit(sub.features)
            Ztr = standardize_apply(stats, sub.features)
            Zte = standardize_apply(stats, Xte)
            rf = fit_forest(
                Ztr, sub.labels,
                ForestConfig(kind="random_forest", n_trees=500, seed=fold_seed),
                n_jobs=NJOBS,
            )
            accs["rf"].append(
                float(np.mean(
                    np.argmax(forest_predict_proba(rf, Zte), axis=1) == yte
                ))
            )

            lr = fit_logreg(Ztr, sub.labels)
            accs["lr_raw"].append(
                float(np.mean(
                    np.argmax(logreg_predict_proba(lr, Zte), axis=1) == yte
                ))
            )
            Dtr = cascade_transform(afs, sub.features)
            Dte = cascade_transform(afs, Xte)
            dstats = standardize_fit(Dtr)
            lr2 = fit_logreg(standardize_apply(dstats, Dtr), sub.labels)
            accs["lr_deep"].append(
                float(np.mean(
                    np.argmax(
                        logreg_predict_proba(lr2, standardize_apply(dstats, Dte)),
                        axis=1,
                    ) == yte
                ))
            )
        full = fit_cascade(
            data, CascadeConfig(seed=derive_seed(s, 99)), n_jobs=NJOBS
        )
        rows.append({
            "data": data,
            "means": {k: float(np.mean(v)) for k, v in accs.items()},
            "full_model": full,
        })
    _CACHE["ablation"] = rows
    return rows


# ----------------------------------------------------------------------
# 1: importance averaging and ensemble posterior are exact
# ----------------------------------------------------------------------


def _naive_posterior(model, X):
    """Recompute the cascade posterior from its parts, without the
    cascade's own forward pass."""
    Z = standardize_apply(model.standardizer, np.asarray(X, dtype=np.float64))
    for layer in model.layers[:-1]:
        blocks = [Z[:, layer.mask.kept_indices]]
        blocks += [forest_predict_proba(f, Z) for f in layer.forests]
        Z = np.concatenate(blocks, axis=1)
    last = model.layers[-1]
    total = np.zeros((Z.shape[0], model.n_classes))
    for f in last.forests:
        total = total + forest_predict_proba(f, Z)
    return total / len(last.forests)


def test_accept_importance_mean_and_posterior_exactness():
    models = _small_models()
    rng = np.random.default_rng(101)
    with criterion(
        "importance averaging and ensemble posterior match naive "
        "recomputation on 100 fixtures (1e-12)", 1.0
    ):
        for trial in range(100):
            k = int(rng.integers(1, 7))
            d = int(rng.integers(1, 40))
            vectors = [rng.random(d) for _ in range(k)]
            naive = np.zeros(d)
            for v in vectors:
                naive += v
            naive /= k
            got = aggregate_importance(vectors)
            assert np.max(np.abs(got - naive)) <= 1e-12

            data, model = models[trial % len(models)]
            rows = rng.integers(0, data.n_samples, size=5)
            X = data.features[rows]
            expect = _naive_posterior(model, X)
            assert np.max(np.abs(cascade_predict_proba(model, X) - expect)) <= 1e-12


# ----------------------------------------------------------------------
# 2: exhaustive split search equals a brute-force oracle
# ----------------------------------------------------------------------


def _oracle_split(X, y, w, n_classes, msl):
    """All (feature, midpoint) candidates, scored in exact integer
    arithmetic; ties keep the lowest feature then the lowest threshold."""
    active = np.flatnonzero(w > 0)
    n_w = int(w[active].sum())
    cls_w = np.array(
        [int(w[active[y[active] == c]].sum()) for c in range(n_classes)],
        dtype=object,
    )
    parent_num = int(np.sum(cls_w * cls_w))  # parent proxy = parent_num / n_w
    best = None  # (num, den, feature, threshold)
    for f in range(X.shape[1]):
        vals = np.unique(X[active, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (float(lo) + float(hi)) / 2.0
            if thr == hi:
                thr = float(lo)
            left = active[X[active, f] <= thr]
            right = active[X[active, f] > thr]
            n_l, n_r = int(w[left].sum()), int(w[right].sum())
            if n_l < msl or n_r < msl:
                continue
            ssq_l = sum(int(w[left[y[left] == c]].sum()) ** 2 for c in range(n_classes))
            ssq_r = sum(int(w[right[y[right] == c]].sum()) ** 2 for c in range(n_classes))
            num = ssq_l * n_r + ssq_r * n_l
            den = n_l * n_r
            if num * n_w <= parent_num * den:
                continue  # no strict impurity decrease over the parent
            if best is None or num * best[1] > best[0] * den:
                best = (num, den, f, thr)
    if best is None:
        return None
    gain = (Fraction(best[0], best[1]) - Fraction(parent_num, n_w)) / n_w
    return best[2], best[3], float(gain)


def test_accept_split_search_matches_bruteforce():
    rng = np.random.default_rng(202)
    with criterion(
        "exhaustive split search equals the all-candidate brute-force "
        "oracle on 200 instances", 10.0
    ):
        checked_splits = 0
        for trial in range(200):
            n = int(rng.integers(5, 51))
            d = int(rng.integers(1, 7))
            n_classes = int(rng.integers(2, 4))
            X = (rng.integers(0, 6, size=(n, d)) / 2.0).astype(np.float64)
            y = rng.integers(0, n_classes, size=n)
            y[: n_classes] = np.arange(n_classes)
            if trial % 3 == 2:
                w = rng.integers(0, 4, size=n).astype(np.float64)
                w[: n_classes] = 1.0  # keep every class active
            else:
                w = np.ones(n)
            msl = int(rng.integers(1, 6)) if trial % 4 == 3 else 1
            got = best_split(
                X, y, np.arange(d),
                TreeParams(min_samples_leaf=msl),
                sample_weights=w,
            )
            want = _oracle_split(X, y, w, n_classes, msl)
            if want is None:
                assert got is None
                continue
            assert got is not None
            assert got.feature == want[0]
            assert got.threshold == want[1]
            assert abs(got.gain - want[2]) <= 1e-9
            checked_splits += 1
        assert checked_splits >= 100  # the sweep must mostly hit real splits


# ----------------------------------------------------------------------
# 3: confusion metrics by full enumeration; AUC vs pairwise oracle
# ----------------------------------------------------------------------


def test_accept_confusion_metrics_and_auc_oracles():
    rng = np.random.default_rng(303)
    with criterion(
        "acc/sen/spe match enumerated confusion tables; AUC matches the "
        "pairwise rank oracle (1e-12)", 10.0
    ):
        n_tables = 0
        for total in range(0, 21):
            for tp in range(total + 1):
                for tn in range(total - tp + 1):
                    for fp in range(total - tp - tn + 1):
                        fn = total - tp - tn - fp
                        cm = ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)
                        n_tables += 1
                        if total == 0:
                            with pytest.raises(MetricError):
                                acc(cm)
                        else:
                            assert acc(cm) == float(Fraction(tp + tn, total))
                        if tp + fn == 0:
                            with pytest.raises(MetricError):
                                sen(cm)
                        else:
                            assert sen(cm) == float(Fraction(tp, tp + fn))
                        if tn + fp == 0:
                            with pytest.raises(MetricError):
                                spe(cm)
                        else:
                            assert spe(cm) == float(Fraction(tn, tn + fp))
        assert n_tables == 10626  # every table with total <= 20

        for _ in range(100):
            n = int(rng.integers(6, 41))
            scores = rng.integers(0, 5, size=n) / 2.0  # heavy ties
            labels = rng.integers(0, 2, size=n)
            labels[:2] = [0, 1]
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            total = Fraction(0)
            for p in pos:
                for q in neg:
                    if p > q:
                        total += 1
                    elif p == q:
                        total += Fraction(1, 2)
            expected = total / (len(pos) * len(neg))
            assert abs(roc_auc(scores, labels).auc - float(expected)) <= 1e-12


# ----------------------------------------------------------------------
# 4: fixed-seed training is reproducible down to the archive bytes
# ----------------------------------------------------------------------


def test_accept_archives_deterministic_across_runs_and_threads(tmp_path):
    with criterion(
        "fixed-seed training yields byte-identical archives across repeat "
        "runs and across 1-thread vs %d-thread fits" % NJOBS, 120.0
    ):
        _, _, paths = _standard_archives(tmp_path)
        first = paths[0].read_bytes()
        assert len(first) > 1000
        assert paths[1].read_bytes() == first
        assert paths[2].read_bytes() == first


# ----------------------------------------------------------------------
# 5: selection neither hurts accuracy nor keeps the wrong columns
# ----------------------------------------------------------------------


def test_accept_selection_ablation_direction():
    with criterion(
        "selection keeps CV accuracy vs no-selection and a 500-tree forest "
        "baseline; informative columns outlive noise on >=8/10 datasets",
        600.0,
    ):
        corpus = _ablation_corpus()
        afs = float(np.mean([r["means"]["afs"] for r in corpus]))
        df = float(np.mean([r["means"]["df"] for r in corpus]))
        rf = float(np.mean([r["means"]["rf"] for r in corpus]))
        assert afs >= df - 0.01, "with selection %.4f vs without %.4f" % (afs, df)
        assert afs >= rf - 0.01, "with selection %.4f vs forest %.4f" % (afs, rf)
        assert df >= rf - 0.01, "without selection %.4f vs forest %.4f" % (df, rf)

        enriched = 0
        for row in corpus:
            names = row["data"].feature_names
            surv = surviving_original_features(row["full_model"])
            kept = {names[int(i)] for i in surv}
            n_inf = sum(1 for n in names if n.startswith("inf_"))
            n_nse = sum(1 for n in names if n.startswith("nse_"))
            frac_inf = sum(1 for n in kept if n.startswith("inf_")) / n_inf
            frac_nse = sum(1 for n in kept if n.startswith("nse_")) / n_nse
            if frac_inf > frac_nse:
                enriched += 1
        assert enriched >= 8, "informative columns enriched on %d/10" % enriched


# ----------------------------------------------------------------------
# 6: the learned representation transfers to a linear model
# ----------------------------------------------------------------------


def test_accept_transform_features_help_linear_model():
    with criterion(
        "logistic regression on cascade features matches or beats "
        "logistic regression on raw features (10 datasets)", 300.0
    ):
        corpus = _ablation_corpus()
        deep = float(np.mean([r["means"]["lr_deep"] for r in corpus]))
        raw = float(np.mean([r["means"]["lr_raw"] for r in corpus]))
        assert deep >= raw - 0.01, "on transform %.4f vs raw %.4f" % (deep, raw)


# ----------------------------------------------------------------------
# 7: boosting loss is monotone; logistic gradient is exact
# ----------------------------------------------------------------------


def test_accept_boosting_loss_monotone_and_logreg_gradient():
    rng = np.random.default_rng(707)
    with criterion(
        "boosting training loss never increases; logistic gradient matches "
        "finite differences (1e-4 relative)", 30.0
    ):
        for trial in range(12):
            n = int(rng.integers(60, 200))
            d = int(rng.integers(3, 10))
            n_classes = 2 if trial % 3 else 3
            X = rng.normal(size=(n, d))
            y = rng.integers(0, n_classes, size=n)
            y[: n_classes] = np.arange(n_classes)
            cfg = ForestConfig(
                kind="gbdt",
                n_trees=int(rng.integers(3, 25)),
                learning_rate=float(rng.choice([0.05, 0.1, 0.3, 0.5])),
                gbdt_depth=int(rng.integers(1, 4)),
            )
            model = fit_gbdt(X, y, cfg)
            for trace in model.training_loss:
                assert len(trace) == cfg.n_trees + 1
                assert (np.diff(np.array(trace)) <= 1e-12).all()

        for _ in range(20):
            n = int(rng.integers(15, 60))
            d = int(rng.integers(1, 8))
            X = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n)
            params = rng.normal(size=d + 1)
            l2 = float(rng.choice([0.0, 0.01, 0.5]))
            _, grad = logreg_loss_grad(params, X, y, l2)
            eps = 1e-6
            for i in range(d + 1):
                bump = params.copy()
                bump[i] += eps
                up, _ = logreg_loss_grad(bump, X, y, l2)
                bump[i] -= 2 * eps
                down, _ = logreg_loss_grad(bump, X, y, l2)
                numeric = (up - down) / (2 * eps)
                assert abs(numeric - grad[i]) <= 1e-4 * max(1.0, abs(grad[i]))


# ----------------------------------------------------------------------
# 8: archives round-trip bit-exactly for every fixture model
# ----------------------------------------------------------------------


def test_accept_persistence_roundtrip_bit_exact(tmp_path):
    fixtures = []
    for data, model in _small_models():
        fixtures.append((data.features[:64], model))
    sdata, smodel, _ = _standard_archives(tmp_path)
    fixtures.append((sdata.features[:64], smodel))
    for row in _ablation_corpus():
        fixtures.append((row["data"].features[:64], row["full_model"]))

    with criterion(
        "every fixture model archives, reloads, and predicts bit-exactly "
        "(%d models)" % len(fixtures), 10.0
    ):
        for i, (X, model) in enumerate(fixtures):
            path = tmp_path / ("rt_%d.json" % i)
            save_model(model, path)
            loaded = load_model(path)
            np.testing.assert_array_equal(
                cascade_predict_proba(loaded, X), cascade_predict_proba(model, X)
            )
            again = tmp_path / ("rt_%d_again.json" % i)
            save_model(loaded, again)
            assert again.read_bytes() == path.read_bytes()
