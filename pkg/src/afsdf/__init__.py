"""Adaptive feature selection guided deep forest for tabular classification.

A cascade of heterogeneous tree ensembles (GBDT, random forest, extremely
randomized trees) where every layer augments its input with each forest's
class-probability vector, ranks features by averaged forest importance,
and discards the lowest-ranked ones before the next layer.  Ships with
stratified cross-validation tooling, ROC/AUC metrics, a logistic-
regression baseline, checksummed JSON model archives, and the ``afsdf``
command-line interface.
"""

from .backend import backend_name
from .cascade import (
    CascadeConfig,
    CascadeModel,
    LayerModel,
    SelectionMask,
    aggregate_importance,
    cascade_predict_label,
    cascade_predict_proba,
    cascade_transform,
    default_forest_roster,
    fit_cascade,
    fit_layer,
    original_importance,
    select_features,
    surviving_original_features,
)
from .dataset import (
    Dataset,
    FoldAssignment,
    StandardizerStats,
    SyntheticSpec,
    load_csv,
    standardize_apply,
    standardize_fit,
    stratified_folds,
    synth_generate,
)
from .errors import (
    AfsdfError,
    ArchiveChecksumError,
    ArchiveError,
    ArchiveVersionError,
    DataError,
    DimensionError,
    FoldError,
    MetricError,
)
from .evaluation import (
    ConfusionMatrix,
    CvReport,
    FoldMetrics,
    LogregModel,
    LogregSpec,
    RocCurve,
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
from .forest import (
    ForestConfig,
    ForestModel,
    fit_extra_trees,
    fit_forest,
    fit_gbdt,
    fit_random_forest,
    forest_importance,
    forest_predict_proba,
)
from .persistence import load_model, save_model
from .tree import (
    DecisionTree,
    RegressionTree,
    SplitResult,
    TreeParams,
    best_split,
    default_mtry,
    fit_tree,
    gini_impurity,
    tree_importance,
    tree_predict_proba,
)

__version__ = "0.1.0"

__all__ = [
    "AfsdfError",
    "ArchiveChecksumError",
    "ArchiveError",
    "ArchiveVersionError",
    "CascadeConfig",
    "CascadeModel",
    "ConfusionMatrix",
    "CvReport",
    "DataError",
    "Dataset",
    "DecisionTree",
    "DimensionError",
    "FoldAssignment",
    "FoldError",
    "FoldMetrics",
    "ForestConfig",
    "ForestModel",
    "LayerModel",
    "LogregModel",
    "LogregSpec",
    "MetricError",
    "RegressionTree",
    "RocCurve",
    "SelectionMask",
    "SplitResult",
    "StandardizerStats",
    "SyntheticSpec",
    "TreeParams",
    "acc",
    "aggregate_importance",
    "backend_name",
    "best_split",
    "cascade_predict_label",
    "cascade_predict_proba",
    "cascade_transform",
    "confusion",
    "crossval_evaluate",
    "default_forest_roster",
    "default_mtry",
    "fit_cascade",
    "fit_extra_trees",
    "fit_forest",
    "fit_gbdt",
    "fit_layer",
    "fit_logreg",
    "fit_random_forest",
    "fit_tree",
    "forest_importance",
    "forest_predict_proba",
    "gini_impurity",
    "load_csv",
    "load_model",
    "logreg_loss_grad",
    "logreg_predict_proba",
    "original_importance",
    "roc_auc",
    "save_model",
    "select_features",
    "sen",
    "spe",
    "standardize_apply",
    "standardize_fit",
    "stratified_folds",
    "surviving_original_features",
    "synth_generate",
    "tree_importance",
    "tree_predict_proba",
    "__version__",
]
