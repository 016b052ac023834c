"""Shared fixtures: small synthetic datasets and a fitted mini cascade.

Session scope keeps the expensive cascade fits to one per test run; every
consumer treats fitted models as immutable.
"""

from __future__ import annotations

import numpy as np
import pytest

from afsdf.cascade import CascadeConfig, fit_cascade
from afsdf.dataset import Dataset, SyntheticSpec, synth_generate
from afsdf.forest import ForestConfig


@pytest.fixture(scope="session")
def binary_data() -> Dataset:
    """Separable two-class data: 500 x 50 with 10 informative columns."""
    return synth_generate(SyntheticSpec(n_samples=500, seed=7))


@pytest.fixture(scope="session")
def small_binary_data() -> Dataset:
    return synth_generate(SyntheticSpec(n_samples=240, seed=3))


@pytest.fixture(scope="session")
def three_class_data() -> Dataset:
    rng = np.random.default_rng(11)
    n = 240
    X = rng.normal(size=(n, 8))
    y = rng.integers(0, 3, n)
    X[y == 1, 0] += 2.5
    X[y == 2, 1] -= 2.5
    return Dataset(
        features=X,
        labels=y,
        feature_names=["f%d" % i for i in range(8)],
        class_names=["a", "b", "c"],
    )


@pytest.fixture(scope="session")
def mini_roster() -> tuple[ForestConfig, ...]:
    return (
        ForestConfig(kind="gbdt", n_trees=5),
        ForestConfig(kind="random_forest", n_trees=5),
        ForestConfig(kind="extra_trees", n_trees=5),
    )


@pytest.fixture(scope="session")
def mini_config(mini_roster) -> CascadeConfig:
    return CascadeConfig(
        forest_configs=mini_roster,
        discard_ratio=0.2,
        min_features=8,
        max_layers=3,
        seed=42,
    )


@pytest.fixture(scope="session")
def mini_cascade(small_binary_data, mini_config):
    """One fitted cascade shared by read-only tests."""
    return fit_cascade(small_binary_data, mini_config, n_jobs=2)
