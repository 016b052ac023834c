"""Dataset loading, validation, standardization, folds, and synthetic data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_seed
from .errors import DataError, DimensionError, FoldError


@dataclass
class Dataset:
    """A fully validated tabular classification dataset.

    ``labels`` are contiguous class indices into ``class_names``; the
    original label strings are kept only through that list.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    class_names: list[str]

    def __post_init__(self) -> None:
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError("features must be a 2-d array")
        n, d = self.features.shape
        if n < 1:
            raise DataError("dataset has no rows")
        if d < 1:
            raise DataError("dataset has no feature columns")
        if len(self.feature_names) != d:
            raise DataError(
                "feature_names length %d does not match %d columns"
                % (len(self.feature_names), d)
            )
        if self.labels.shape != (n,):
            raise DataError("labels length does not match number of rows")
        if not np.isfinite(self.features).all():
            raise DataError("features contain non-finite values")
        n_classes = len(self.class_names)
        if n_classes < 2:
            raise DataError("dataset must contain at least two classes")
        if self.labels.min() < 0 or self.labels.max() >= n_classes:
            raise DataError("labels out of range for %d classes" % n_classes)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Row subset preserving schema (classes are kept even if now absent)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            list(self.feature_names),
            list(self.class_names),
        )


def load_csv(path: str, label_column: str) -> Dataset:
    """Load a labeled CSV with one header row.

    Every non-label cell must be a finite number.  Label values are mapped
    to class indices in order of first appearance; feature column order is
    preserved.  Errors name the offending file, row, or cell.
    """
    try:
        fh = open(path, "r", encoding="utf-8-sig", newline="")
    except OSError as exc:
        raise DataError("cannot open %s: %s" % (path, exc.strerror or exc)) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("%s is empty (missing header row)" % path) from None
        header = [h.strip() for h in header]
        if any(h == "" for h in header):
            raise DataError("%s has an empty header cell" % path)
        seen: set[str] = set()
        for h in header:
            if h in seen:
                raise DataError("%s has duplicate column %r" % (path, h))
            seen.add(h)
        if label_column not in header:
            raise DataError("%s has no label column %r" % (path, label_column))
        label_pos = header.index(label_column)
        feature_names = [h for h in header if h != label_column]
        if not feature_names:
            raise DataError("%s has no feature columns" % path)

        rows: list[list[float]] = []
        label_values: list[str] = []
        for row_num, cells in enumerate(reader, start=1):
            if len(cells) != len(header):
                raise DataError(
                    "%s row %d has %d cells, expected %d"
                    % (path, row_num, len(cells), len(header))
                )
            parsed = []
            for pos, cell in enumerate(cells):
                if pos == label_pos:
                    continue
                name = header[pos]
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
            label_values.append(cells[label_pos].strip())

    if not rows:
        raise DataError("%s has a header but no data rows" % path)
    class_names: list[str] = []
    class_index: dict[str, int] = {}
    labels = np.empty(len(label_values), dtype=np.int64)
    for i, value in enumerate(label_values):
        if value not in class_index:
            class_index[value] = len(class_names)
            class_names.append(value)
        labels[i] = class_index[value]
    if len(class_names) < 2:
        raise DataError(
            "%s contains a single class %r; need at least two" % (path, class_names[0])
        )
    return Dataset(np.array(rows, dtype=np.float64), labels, feature_names, class_names)


@dataclass
class StandardizerStats:
    """Per-column centering/scaling parameters (population statistics)."""

    means: np.ndarray
    stdevs: np.ndarray  # constant columns hold 1.0 so apply() is a no-op there

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stdevs = np.asarray(self.stdevs, dtype=np.float64)


STD_FLOOR = 1e-12


def standardize_fit(features: np.ndarray) -> StandardizerStats:
    """Column means and population standard deviations of a training matrix."""
    X = np.asarray(features, dtype=np.float64)
    means = X.mean(axis=0)
    stdevs = X.std(axis=0)
    stdevs = np.where(stdevs < STD_FLOOR, 1.0, stdevs)
    return StandardizerStats(means, stdevs)


def standardize_apply(stats: StandardizerStats, features: np.ndarray) -> np.ndarray:
    """Apply fitted centering/scaling to any matrix with matching width."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != stats.means.shape[0]:
        raise DimensionError(
            "standardizer fitted for %d columns, got matrix with %s"
            % (stats.means.shape[0], "x".join(map(str, X.shape)))
        )
    return (X - stats.means) / stats.stdevs


@dataclass
class FoldAssignment:
    """Fold index per sample for stratified k-fold splitting."""

    fold_of: np.ndarray
    k: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, test


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> FoldAssignment:
    """Deterministic stratified folds: per-class counts differ by at most one.

    Each class is shuffled and dealt round-robin; the starting fold rotates
    by the running remainder so overall fold sizes stay balanced too.
    """
    y = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise FoldError("k must be at least 2, got %d" % k)
    n_classes = int(y.max()) + 1 if y.size else 0
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    offset = 0
    for c in range(n_classes):
        members = np.flatnonzero(y == c)
        if members.size < k:
            raise FoldError(
                "class %d has %d samples, fewer than k=%d" % (c, members.size, k)
            )
        rng = np.random.default_rng(derive_seed(seed, c))
        perm = rng.permutation(members)
        fold_of[perm] = (np.arange(perm.size) + offset) % k
        offset = (offset + perm.size) % k
    return FoldAssignment(fold_of, k)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a two-class synthetic dataset with known column roles."""

    n_samples: int = 500
    n_informative: int = 10
    n_redundant: int = 10
    n_noise: int = 30
    class_separation: float = 1.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 4:
            raise DataError("n_samples must be at least 4")
        if self.n_informative < 1:
            raise DataError("n_informative must be at least 1")
        if self.n_redundant < 0 or self.n_noise < 0:
            raise DataError("column counts must be non-negative")
        if not self.class_separation > 0:
            raise DataError("class_separation must be positive")


def synth_generate(spec: SyntheticSpec) -> Dataset:
    """Generate a balanced two-class dataset from a :class:`SyntheticSpec`.

    Informative columns are unit-variance Gaussians whose class means sit
    ``class_separation`` apart; redundant columns are fixed random linear
    combinations of the informative block plus small noise; noise columns
    are label-independent standard Gaussians.  Column names carry the role
    prefix (``inf_``, ``red_``, ``nse_``).  Identical specs produce
    byte-identical datasets.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    n1 = n // 2
    n0 = n - n1
    labels = rng.permutation(np.repeat(np.array([0, 1], dtype=np.int64), [n0, n1]))
    sign = np.where(labels == 1, 1.0, -1.0)
    offset = 0.5 * spec.class_separation
    X_inf = rng.standard_normal((n, spec.n_informative)) + offset * sign[:, None]
    blocks = [X_inf]
    names = ["inf_%d" % i for i in range(spec.n_informative)]
    if spec.n_redundant:
        mix = rng.standard_normal((spec.n_informative, spec.n_redundant))
        mix /= np.sqrt((mix * mix).sum(axis=0))
        X_red = X_inf @ mix + 0.05 * rng.standard_normal((n, spec.n_redundant))
        blocks.append(X_red)
        names += ["red_%d" % i for i in range(spec.n_redundant)]
    if spec.n_noise:
        blocks.append(rng.standard_normal((n, spec.n_noise)))
        names += ["nse_%d" % i for i in range(spec.n_noise)]
    features = np.concatenate(blocks, axis=1)
    return Dataset(features, labels, names, ["class_0", "class_1"])
