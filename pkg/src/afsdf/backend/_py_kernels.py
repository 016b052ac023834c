"""Pure-Python/numpy tree kernels: the reference backend.

The compiled backend (``_core.pyx``) mirrors this module operation for
operation.  Both must produce bit-identical trees, so every floating-point
accumulation here is written in a fixed, explicitly sequential order:

* running sums use ``np.cumsum`` / ``np.bincount`` (sequential by element),
  never ``np.sum`` (pairwise reduction order);
* sums over classes are unrolled into an ascending-class loop;
* candidate comparisons are strict ``>`` over a fixed scan order
  (features ascending, split positions ascending), which implements the
  documented tie-break: lowest feature index, then lowest threshold;
* split quality is the children purity proxy
  ``(ssqL*nR + ssqR*nL) / (nL*nR)`` — a single rounding of the exact
  rational value when weights are integers, so candidate ordering matches
  exact rational comparison at any realistic node size.

Trees are emitted as flat preorder arrays: ``feature[i] == -1`` marks a
leaf, internal nodes route ``value <= threshold`` to ``left``.
"""

from __future__ import annotations

import numpy as np

from .._rng import SplitMix, derive_seed

SPLIT_EXHAUSTIVE = 0
SPLIT_RANDOM_THRESHOLD = 1


def _select_candidates(rng: SplitMix, d: int, mtry: int) -> list[int]:
    """Partial Fisher-Yates draw of ``mtry`` distinct features, returned sorted.

    Consumes no randomness when every feature is a candidate, so full-mtry
    trees are seed-independent in exhaustive mode.
    """
    if mtry >= d:
        return list(range(d))
    pool = list(range(d))
    for i in range(mtry):
        j = i + rng.next_below(d - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:mtry])


def _midpoint(lo: float, hi: float) -> float:
    # Guard: the midpoint of two adjacent doubles can round up to the upper
    # value, which would send both sides left; fall back to the lower value.
    thr = (lo + hi) / 2.0
    if thr == hi:
        thr = lo
    return thr


def _scan_exhaustive_cls(X, seg, yw, ws, n_classes, cand, msl, best_proxy):
    """Best exhaustive split over candidate features for one node.

    Returns ``(feature, threshold, proxy)`` with ``proxy > best_proxy``,
    or ``None``.  ``best_proxy`` starts at the parent's purity proxy, which
    enforces strictly positive split gain.
    """
    found = None
    n = seg.size
    ar = np.arange(n)
    for f in cand:
        vals = X[seg, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        if sv[0] == sv[-1]:
            continue
        sy = yw[order]
        sw = ws[order]
        cumw = np.cumsum(sw)
        totw = cumw[-1]
        onehot = np.zeros((n, n_classes))
        onehot[ar, sy] = sw
        cum = np.cumsum(onehot, axis=0)
        tot = cum[-1]
        ssq_l = cum[:, 0] * cum[:, 0]
        for c in range(1, n_classes):
            ssq_l = ssq_l + cum[:, c] * cum[:, c]
        rem0 = tot[0] - cum[:, 0]
        ssq_r = rem0 * rem0
        for c in range(1, n_classes):
            rem = tot[c] - cum[:, c]
            ssq_r = ssq_r + rem * rem
        n_l = cumw[:-1]
        n_r = totw - cumw[:-1]
        ok = (sv[:-1] < sv[1:]) & (n_l >= msl) & (n_r >= msl)
        pos = np.flatnonzero(ok)
        if pos.size == 0:
            continue
        num = ssq_l[pos] * n_r[pos] + ssq_r[pos] * n_l[pos]
        den = n_l[pos] * n_r[pos]
        proxy = num / den
        k = int(np.argmax(proxy))
        p = float(proxy[k])
        if p > best_proxy:
            j = int(pos[k])
            found = (int(f), _midpoint(float(sv[j]), float(sv[j + 1])), p)
            best_proxy = p
    return found


def _scan_random_cls(X, seg, yw, ws, n_classes, cand, msl, best_proxy, rng):
    """Best random-threshold split: one uniform draw per non-constant candidate."""
    found = None
    for f in cand:
        vals = X[seg, f]
        lo = float(vals.min())
        hi = float(vals.max())
        if lo == hi:
            continue
        u = rng.next_uniform()
        thr = lo + u * (hi - lo)
        if thr >= hi:
            continue
        mask = vals <= thr
        sel_w = ws[mask]
        oth_w = ws[~mask]
        n_l = float(np.cumsum(sel_w)[-1])
        n_r = float(np.cumsum(oth_w)[-1])
        if n_l < msl or n_r < msl:
            continue
        cl = np.bincount(yw[mask], weights=sel_w, minlength=n_classes)
        cr = np.bincount(yw[~mask], weights=oth_w, minlength=n_classes)
        ssq_l = cl[0] * cl[0]
        for c in range(1, n_classes):
            ssq_l = ssq_l + cl[c] * cl[c]
        ssq_r = cr[0] * cr[0]
        for c in range(1, n_classes):
            ssq_r = ssq_r + cr[c] * cr[c]
        num = ssq_l * n_r + ssq_r * n_l
        den = n_l * n_r
        proxy = float(num / den)
        if proxy > best_proxy:
            found = (int(f), thr, proxy)
            best_proxy = proxy
    return found


def build_classification_tree(
    X,
    y,
    w,
    n_classes,
    max_depth,
    min_samples_leaf,
    min_samples_split,
    mtry,
    split_mode,
    seed,
    candidates=None,
):
    """Fit one CART-style classification tree.

    Rows with zero weight are excluded (bootstrap out-of-bag rows).
    Node ids are preorder; the per-node RNG stream is keyed by
    ``(seed, node_id)`` and is consumed as: feature subsampling draws,
    then one threshold draw per non-constant candidate (random mode).

    Returns ``(feature, threshold, left, right, leaf_counts,
    importance_raw, root_weight)``; ``importance_raw`` is in purity-proxy
    units (callers rescale by total weight).
    """
    n_all, d = X.shape
    members = np.flatnonzero(w > 0.0).astype(np.int64)
    n0 = int(members.size)
    cap = 2 * n0 + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    leaf_counts = np.zeros((cap, n_classes))
    imp = np.zeros(d)
    msl = float(min_samples_leaf)
    msp = float(min_samples_split)
    idx = members.copy()
    root_weight = 0.0
    n_nodes = 0
    stack = [(0, n0, 0, -1, False)]
    while stack:
        start, end, depth, parent, is_left = stack.pop()
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        seg = idx[start:end]
        yw = y[seg]
        ws = w[seg]
        cnt = np.bincount(yw, weights=ws, minlength=n_classes)
        n_w = float(np.cumsum(ws)[-1])
        if node == 0:
            root_weight = n_w
        is_leaf = (
            n_w < msp
            or (max_depth >= 0 and depth >= max_depth)
            or int(np.count_nonzero(cnt)) <= 1
        )
        split = None
        if not is_leaf:
            ssq_p = cnt[0] * cnt[0]
            for c in range(1, n_classes):
                ssq_p = ssq_p + cnt[c] * cnt[c]
            parent_proxy = float(ssq_p / n_w)
            rng = SplitMix(derive_seed(seed, node))
            if candidates is not None:
                cand = candidates
            else:
                cand = _select_candidates(rng, d, mtry)
            if split_mode == SPLIT_EXHAUSTIVE:
                split = _scan_exhaustive_cls(
                    X, seg, yw, ws, n_classes, cand, msl, parent_proxy
                )
            else:
                split = _scan_random_cls(
                    X, seg, yw, ws, n_classes, cand, msl, parent_proxy, rng
                )
            if split is not None:
                f, thr, proxy = split
                imp[f] = imp[f] + (proxy - parent_proxy)
        if split is None:
            leaf_counts[node] = cnt
        else:
            f, thr, _ = split
            feature[node] = f
            threshold[node] = thr
            go_left = X[seg, f] <= thr
            n_left = int(np.count_nonzero(go_left))
            idx[start:end] = np.concatenate([seg[go_left], seg[~go_left]])
            mid = start + n_left
            stack.append((mid, end, depth + 1, node, False))
            stack.append((start, mid, depth + 1, node, True))
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        leaf_counts[:n_nodes].copy(),
        imp,
        root_weight,
    )


def build_regression_tree(
    X,
    grad,
    hess,
    max_depth,
    min_samples_leaf,
    min_samples_split,
    hessian_floor,
):
    """Fit one variance-reduction regression tree on all rows, all features.

    Used for boosting stages: leaf value is the Newton step
    ``sum(grad) / max(sum(hess), hessian_floor)`` (unscaled).  Returns
    ``(feature, threshold, left, right, leaf_value, importance_raw)`` with
    importance in sum-of-squares gain units.
    """
    n0, d = X.shape
    cap = 2 * n0 + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    leaf_value = np.zeros(cap)
    imp = np.zeros(d)
    idx = np.arange(n0, dtype=np.int64)
    n_nodes = 0
    stack = [(0, n0, 0, -1, False)]
    while stack:
        start, end, depth, parent, is_left = stack.pop()
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        seg = idx[start:end]
        n = int(seg.size)
        g = grad[seg]
        is_leaf = n < min_samples_split or (max_depth >= 0 and depth >= max_depth)
        split = None
        if not is_leaf:
            s_p = float(np.cumsum(g)[-1])
            parent_proxy = float((s_p * s_p) / float(n))
            best_proxy = parent_proxy
            for f in range(d):
                vals = X[seg, f]
                order = np.argsort(vals, kind="stable")
                sv = vals[order]
                if sv[0] == sv[-1]:
                    continue
                sg = g[order]
                cumg = np.cumsum(sg)
                totg = cumg[-1]
                s_l = cumg[:-1]
                s_r = totg - cumg[:-1]
                n_l = np.arange(1, n, dtype=np.float64)
                n_r = float(n) - n_l
                counts_ok = (n_l >= min_samples_leaf) & (n_r >= min_samples_leaf)
                ok = (sv[:-1] < sv[1:]) & counts_ok
                pos = np.flatnonzero(ok)
                if pos.size == 0:
                    continue
                t1 = (s_l[pos] * s_l[pos]) / n_l[pos]
                t2 = (s_r[pos] * s_r[pos]) / n_r[pos]
                proxy = t1 + t2
                k = int(np.argmax(proxy))
                p = float(proxy[k])
                if p > best_proxy:
                    j = int(pos[k])
                    split = (int(f), _midpoint(float(sv[j]), float(sv[j + 1])), p)
                    best_proxy = p
            if split is not None:
                f, thr, proxy = split
                imp[f] = imp[f] + (proxy - parent_proxy)
        if split is None:
            s_g = float(np.cumsum(g)[-1])
            s_h = float(np.cumsum(hess[seg])[-1])
            if s_h < hessian_floor:
                s_h = hessian_floor
            leaf_value[node] = s_g / s_h
        else:
            f, thr, _ = split
            feature[node] = f
            threshold[node] = thr
            go_left = X[seg, f] <= thr
            n_left = int(np.count_nonzero(go_left))
            idx[start:end] = np.concatenate([seg[go_left], seg[~go_left]])
            mid = start + n_left
            stack.append((mid, end, depth + 1, node, False))
            stack.append((start, mid, depth + 1, node, True))
    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        leaf_value[:n_nodes].copy(),
        imp,
    )


def route_samples(X, feature, threshold, left, right):
    """Leaf node id for every row (vectorized iterative descent)."""
    n = X.shape[0]
    cur = np.zeros(n, dtype=np.int64)
    while True:
        f = feature[cur]
        active = f >= 0
        if not active.any():
            return cur
        rows = np.flatnonzero(active)
        cur_a = cur[rows]
        go_left = X[rows, f[rows].astype(np.int64)] <= threshold[cur_a]
        cur[rows] = np.where(go_left, left[cur_a], right[cur_a])
