#!/usr/bin/env python3
"""Time the compiled tree kernels against the numpy fallback.

Both backends are bit-identical by construction (the test suite enforces
it); this script only reports how much wall time the extension saves.

Usage:
    python3 benchmarks/bench_backends.py [--samples N] [--features D]
                                         [--repeats R]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from afsdf.backend import SPLIT_EXHAUSTIVE, SPLIT_RANDOM_THRESHOLD
from afsdf.backend import _py_kernels as py_impl

try:
    from afsdf.backend import _core as c_impl
except ImportError:
    c_impl = None


def _time(fn, repeats: int) -> float:
    """Median seconds over ``repeats`` runs (first run warms caches)."""
    fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return statistics.median(samples)


def _workloads(n: int, d: int):
    rng = np.random.default_rng(7)
    X = np.round(rng.normal(size=(n, d)) * 8) / 8
    y = rng.integers(0, 2, size=n).astype(np.int64)
    y[:2] = [0, 1]
    w = np.ones(n)
    wb = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
    p = 1.0 / (1.0 + np.exp(-rng.normal(size=n)))
    grad = y - p
    hess = p * (1.0 - p)
    mtry = max(1, int(np.ceil(np.sqrt(d))))

    def cart(impl):
        return impl.build_classification_tree(
            X, y, wb, 2, -1, 1.0, 2.0, mtry, SPLIT_EXHAUSTIVE, 3
        )

    def extra(impl):
        return impl.build_classification_tree(
            X, y, w, 2, -1, 1.0, 2.0, mtry, SPLIT_RANDOM_THRESHOLD, 3
        )

    def stage(impl):
        return impl.build_regression_tree(X, grad, hess, 3, 1.0, 2.0, 1e-12)

    tree = py_impl.build_classification_tree(
        X, y, w, 2, -1, 1.0, 2.0, d, SPLIT_EXHAUSTIVE, 0
    )
    fresh = rng.normal(size=(n, d))

    def route(impl):
        return impl.route_samples(fresh, tree[0], tree[1], tree[2], tree[3])

    return [
        ("classification tree (bootstrap, exhaustive)", cart),
        ("classification tree (random thresholds)", extra),
        ("boosting stage (depth 3)", stage),
        ("leaf routing", route),
    ]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=480)
    ap.add_argument("--features", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args()

    if c_impl is None:
        print("compiled extension not available; nothing to compare")
        return 1

    print(
        "n=%d  d=%d  repeats=%d (median reported)"
        % (args.samples, args.features, args.repeats)
    )
    header = "%-44s %12s %12s %9s" % ("workload", "python", "compiled", "speedup")
    print(header)
    print("-" * len(header))
    for name, fn in _workloads(args.samples, args.features):
        t_py = _time(lambda: fn(py_impl), args.repeats)
        t_c = _time(lambda: fn(c_impl), args.repeats)
        print(
            "%-44s %10.2fms %10.2fms %8.1fx"
            % (name, t_py * 1e3, t_c * 1e3, t_py / t_c)
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
