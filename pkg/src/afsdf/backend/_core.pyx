# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tree kernels.

Mirror of ``backend._py_kernels`` operation for operation: same RNG streams,
same sort order (value ascending, then in-node position), same sequential
accumulation order for every floating-point sum, same strict-``>`` candidate
comparisons over the same scan order.  The two backends must produce
bit-identical trees; any change here needs the matching change there.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc, qsort

cnp.import_array()

ctypedef unsigned long long u64

cdef extern from *:
    """
    typedef struct { double v; long long pos; } afsdf_sortpair;
    static int afsdf_sortpair_cmp(const void *a, const void *b) {
        const afsdf_sortpair *pa = (const afsdf_sortpair *)a;
        const afsdf_sortpair *pb = (const afsdf_sortpair *)b;
        if (pa->v < pb->v) return -1;
        if (pa->v > pb->v) return 1;
        if (pa->pos < pb->pos) return -1;
        if (pa->pos > pb->pos) return 1;
        return 0;
    }
    """
    ctypedef struct afsdf_sortpair:
        double v
        long long pos
    int afsdf_sortpair_cmp(const void *a, const void *b) nogil

cdef u64 GOLDEN = <u64>0x9E3779B97F4A7C15


cdef inline u64 _mix64(u64 x) nogil:
    x = (x ^ (x >> 30)) * <u64>0xBF58476D1CE4E5B9
    x = (x ^ (x >> 27)) * <u64>0x94D049BB133111EB
    return x ^ (x >> 31)


cdef inline u64 _derive(u64 seed, u64 part) nogil:
    return _mix64(seed + GOLDEN + part)


cdef inline u64 _next_u64(u64 *state) nogil:
    state[0] = state[0] + GOLDEN
    return _mix64(state[0])


cdef inline double _next_uniform(u64 *state) nogil:
    return (<double>(_next_u64(state) >> 11) + 0.5) * (1.0 / 9007199254740992.0)


cdef inline u64 _next_below(u64 *state, u64 n) nogil:
    return _next_u64(state) % n


cdef struct NodeItem:
    long long start
    long long end
    int depth
    long long parent
    int is_left


def build_classification_tree(
    double[:, ::1] X,
    long long[::1] y,
    double[::1] w,
    int n_classes,
    int max_depth,
    long long min_samples_leaf,
    long long min_samples_split,
    int mtry,
    int split_mode,
    object seed,
    object candidates=None,
):
    """Compiled twin of ``_py_kernels.build_classification_tree``."""
    cdef long long n_all = X.shape[0]
    cdef long long d = X.shape[1]
    cdef u64 rng_seed = seed
    cdef double msl = <double>min_samples_leaf
    cdef double msp = <double>min_samples_split
    cdef int use_explicit = 0
    cdef int[::1] cand_view
    cdef long long n_cand_explicit = 0
    if candidates is not None:
        cand_arr = np.ascontiguousarray(candidates, dtype=np.int32)
        cand_view = cand_arr
        n_cand_explicit = cand_arr.shape[0]
        use_explicit = 1
    else:
        cand_view = np.empty(0, dtype=np.int32)

    cdef long long n0 = 0
    cdef long long i
    for i in range(n_all):
        if w[i] > 0.0:
            n0 += 1
    cdef long long cap = 2 * n0 + 1

    feature_arr = np.full(cap, -1, np.int32)
    threshold_arr = np.zeros(cap)
    left_arr = np.full(cap, -1, np.int32)
    right_arr = np.full(cap, -1, np.int32)
    leaf_counts_arr = np.zeros((cap, n_classes))
    imp_arr = np.zeros(d)
    cdef int[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int[::1] left = left_arr
    cdef int[::1] right = right_arr
    cdef double[:, ::1] leaf_counts = leaf_counts_arr
    cdef double[::1] imp = imp_arr

    cdef long long *idx = <long long *>malloc(n0 * sizeof(long long))
    cdef long long *tmp = <long long *>malloc(n0 * sizeof(long long))
    cdef afsdf_sortpair *pairs = <afsdf_sortpair *>malloc(
        n0 * sizeof(afsdf_sortpair)
    )
    cdef double *cnt = <double *>malloc(n_classes * sizeof(double))
    cdef double *cl = <double *>malloc(n_classes * sizeof(double))
    cdef double *cr = <double *>malloc(n_classes * sizeof(double))
    cdef double *tot = <double *>malloc(n_classes * sizeof(double))
    cdef int *pool = <int *>malloc(d * sizeof(int))
    cdef int *cand_buf = <int *>malloc(d * sizeof(int))
    cdef NodeItem *stack = <NodeItem *>malloc((2 * n0 + 4) * sizeof(NodeItem))
    if (
        idx == NULL or tmp == NULL or pairs == NULL or cnt == NULL
        or cl == NULL or cr == NULL or tot == NULL or pool == NULL
        or cand_buf == NULL or stack == NULL
    ):
        free(idx); free(tmp); free(pairs); free(cnt); free(cl); free(cr)
        free(tot); free(pool); free(cand_buf); free(stack)
        raise MemoryError()

    cdef long long n_nodes = 0
    cdef double root_weight = 0.0
    cdef long long sp, start, end, parent, node, row, m, ii, jj, mid, n_left
    cdef int depth, is_left, c, npos, f, fi, n_cand, ci, key, best_f
    cdef double n_w, ssq_p, parent_proxy, best_proxy, best_thr
    cdef double w_, totw, nl, nr, ssql, ssqr, t1, t2, num, den, proxy
    cdef double lo, hi, u, span, tq, thr, x, r0, rr, tdelta
    cdef u64 rng
    cdef long long swap_j

    i = 0
    for row in range(n_all):
        if w[row] > 0.0:
            idx[i] = row
            i += 1

    with nogil:
        sp = 0
        stack[sp].start = 0
        stack[sp].end = n0
        stack[sp].depth = 0
        stack[sp].parent = -1
        stack[sp].is_left = 0
        sp += 1
        while sp > 0:
            sp -= 1
            start = stack[sp].start
            end = stack[sp].end
            depth = stack[sp].depth
            parent = stack[sp].parent
            is_left = stack[sp].is_left
            node = n_nodes
            n_nodes += 1
            if parent >= 0:
                if is_left:
                    left[parent] = <int>node
                else:
                    right[parent] = <int>node
            m = end - start
            for c in range(n_classes):
                cnt[c] = 0.0
            n_w = 0.0
            for ii in range(start, end):
                row = idx[ii]
                cnt[y[row]] += w[row]
                n_w += w[row]
            if node == 0:
                root_weight = n_w
            npos = 0
            for c in range(n_classes):
                if cnt[c] != 0.0:
                    npos += 1
            best_f = -1
            best_thr = 0.0
            if not (
                n_w < msp
                or (max_depth >= 0 and depth >= max_depth)
                or npos <= 1
            ):
                ssq_p = cnt[0] * cnt[0]
                for c in range(1, n_classes):
                    ssq_p = ssq_p + cnt[c] * cnt[c]
                parent_proxy = ssq_p / n_w
                best_proxy = parent_proxy
                rng = _derive(rng_seed, <u64>node)
                if use_explicit:
                    n_cand = <int>n_cand_explicit
                    for ci in range(n_cand):
                        cand_buf[ci] = cand_view[ci]
                elif mtry >= d:
                    n_cand = <int>d
                    for ci in range(n_cand):
                        cand_buf[ci] = ci
                else:
                    for ci in range(<int>d):
                        pool[ci] = ci
                    for ci in range(mtry):
                        jj = ci + <long long>_next_below(&rng, <u64>(d - ci))
                        key = pool[ci]
                        pool[ci] = pool[jj]
                        pool[jj] = key
                    n_cand = mtry
                    # insertion sort: candidates scanned in ascending order
                    for ci in range(n_cand):
                        cand_buf[ci] = pool[ci]
                    for ci in range(1, n_cand):
                        key = cand_buf[ci]
                        jj = ci - 1
                        while jj >= 0 and cand_buf[jj] > key:
                            cand_buf[jj + 1] = cand_buf[jj]
                            jj -= 1
                        cand_buf[jj + 1] = key
                if split_mode == 0:
                    for fi in range(n_cand):
                        f = cand_buf[fi]
                        lo = X[idx[start], f]
                        hi = lo
                        for ii in range(start + 1, end):
                            x = X[idx[ii], f]
                            if x < lo:
                                lo = x
                            if x > hi:
                                hi = x
                        if lo == hi:
                            continue
                        for ii in range(m):
                            pairs[ii].v = X[idx[start + ii], f]
                            pairs[ii].pos = ii
                        qsort(
                            pairs, <size_t>m, sizeof(afsdf_sortpair),
                            afsdf_sortpair_cmp,
                        )
                        for c in range(n_classes):
                            tot[c] = 0.0
                        totw = 0.0
                        for ii in range(m):
                            row = idx[start + pairs[ii].pos]
                            tot[y[row]] += w[row]
                            totw += w[row]
                        for c in range(n_classes):
                            cl[c] = 0.0
                        nl = 0.0
                        for ii in range(m - 1):
                            row = idx[start + pairs[ii].pos]
                            cl[y[row]] += w[row]
                            nl += w[row]
                            if pairs[ii].v < pairs[ii + 1].v:
                                nr = totw - nl
                                if nl >= msl and nr >= msl:
                                    ssql = cl[0] * cl[0]
                                    for c in range(1, n_classes):
                                        ssql = ssql + cl[c] * cl[c]
                                    r0 = tot[0] - cl[0]
                                    ssqr = r0 * r0
                                    for c in range(1, n_classes):
                                        rr = tot[c] - cl[c]
                                        ssqr = ssqr + rr * rr
                                    t1 = ssql * nr
                                    t2 = ssqr * nl
                                    num = t1 + t2
                                    den = nl * nr
                                    proxy = num / den
                                    if proxy > best_proxy:
                                        best_proxy = proxy
                                        best_f = f
                                        thr = (pairs[ii].v + pairs[ii + 1].v) / 2.0
                                        if thr == pairs[ii + 1].v:
                                            thr = pairs[ii].v
                                        best_thr = thr
                else:
                    for fi in range(n_cand):
                        f = cand_buf[fi]
                        lo = X[idx[start], f]
                        hi = lo
                        for ii in range(start + 1, end):
                            x = X[idx[ii], f]
                            if x < lo:
                                lo = x
                            if x > hi:
                                hi = x
                        if lo == hi:
                            continue
                        u = _next_uniform(&rng)
                        span = hi - lo
                        tq = u * span
                        thr = lo + tq
                        if thr >= hi:
                            continue
                        for c in range(n_classes):
                            cl[c] = 0.0
                            cr[c] = 0.0
                        nl = 0.0
                        nr = 0.0
                        for ii in range(start, end):
                            row = idx[ii]
                            x = X[row, f]
                            if x <= thr:
                                cl[y[row]] += w[row]
                                nl += w[row]
                            else:
                                cr[y[row]] += w[row]
                                nr += w[row]
                        if nl < msl or nr < msl:
                            continue
                        ssql = cl[0] * cl[0]
                        for c in range(1, n_classes):
                            ssql = ssql + cl[c] * cl[c]
                        ssqr = cr[0] * cr[0]
                        for c in range(1, n_classes):
                            ssqr = ssqr + cr[c] * cr[c]
                        t1 = ssql * nr
                        t2 = ssqr * nl
                        num = t1 + t2
                        den = nl * nr
                        proxy = num / den
                        if proxy > best_proxy:
                            best_proxy = proxy
                            best_f = f
                            best_thr = thr
                if best_f >= 0:
                    tdelta = best_proxy - parent_proxy
                    imp[best_f] = imp[best_f] + tdelta
            if best_f < 0:
                for c in range(n_classes):
                    leaf_counts[node, c] = cnt[c]
            else:
                feature[node] = best_f
                threshold[node] = best_thr
                n_left = 0
                for ii in range(start, end):
                    row = idx[ii]
                    if X[row, best_f] <= best_thr:
                        tmp[n_left] = row
                        n_left += 1
                jj = n_left
                for ii in range(start, end):
                    row = idx[ii]
                    if not (X[row, best_f] <= best_thr):
                        tmp[jj] = row
                        jj += 1
                for ii in range(m):
                    idx[start + ii] = tmp[ii]
                mid = start + n_left
                stack[sp].start = mid
                stack[sp].end = end
                stack[sp].depth = depth + 1
                stack[sp].parent = node
                stack[sp].is_left = 0
                sp += 1
                stack[sp].start = start
                stack[sp].end = mid
                stack[sp].depth = depth + 1
                stack[sp].parent = node
                stack[sp].is_left = 1
                sp += 1

    free(idx); free(tmp); free(pairs); free(cnt); free(cl); free(cr)
    free(tot); free(pool); free(cand_buf); free(stack)
    return (
        feature_arr[:n_nodes].copy(),
        threshold_arr[:n_nodes].copy(),
        left_arr[:n_nodes].copy(),
        right_arr[:n_nodes].copy(),
        leaf_counts_arr[:n_nodes].copy(),
        imp_arr,
        root_weight,
    )


def build_regression_tree(
    double[:, ::1] X,
    double[::1] grad,
    double[::1] hess,
    int max_depth,
    long long min_samples_leaf,
    long long min_samples_split,
    double hessian_floor,
):
    """Compiled twin of ``_py_kernels.build_regression_tree``."""
    cdef long long n0 = X.shape[0]
    cdef long long d = X.shape[1]
    cdef long long cap = 2 * n0 + 1

    feature_arr = np.full(cap, -1, np.int32)
    threshold_arr = np.zeros(cap)
    left_arr = np.full(cap, -1, np.int32)
    right_arr = np.full(cap, -1, np.int32)
    leaf_value_arr = np.zeros(cap)
    imp_arr = np.zeros(d)
    cdef int[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int[::1] left = left_arr
    cdef int[::1] right = right_arr
    cdef double[::1] leaf_value = leaf_value_arr
    cdef double[::1] imp = imp_arr

    cdef long long *idx = <long long *>malloc(n0 * sizeof(long long))
    cdef long long *tmp = <long long *>malloc(n0 * sizeof(long long))
    cdef afsdf_sortpair *pairs = <afsdf_sortpair *>malloc(
        n0 * sizeof(afsdf_sortpair)
    )
    cdef NodeItem *stack = <NodeItem *>malloc((2 * n0 + 4) * sizeof(NodeItem))
    if idx == NULL or tmp == NULL or pairs == NULL or stack == NULL:
        free(idx); free(tmp); free(pairs); free(stack)
        raise MemoryError()

    cdef long long n_nodes = 0
    cdef long long sp, start, end, parent, node, row, m, ii, jj, mid, n_left
    cdef long long f, best_f, nl_i, nr_i
    cdef int depth, is_left
    cdef double s_p, parent_proxy, best_proxy, best_thr, thr
    cdef double sl, sr, totg, nl_d, nr_d, t1, t2, proxy, s_g, s_h, tdelta
    cdef double lo, hi, x

    for ii in range(n0):
        idx[ii] = ii

    with nogil:
        sp = 0
        stack[sp].start = 0
        stack[sp].end = n0
        stack[sp].depth = 0
        stack[sp].parent = -1
        stack[sp].is_left = 0
        sp += 1
        while sp > 0:
            sp -= 1
            start = stack[sp].start
            end = stack[sp].end
            depth = stack[sp].depth
            parent = stack[sp].parent
            is_left = stack[sp].is_left
            node = n_nodes
            n_nodes += 1
            if parent >= 0:
                if is_left:
                    left[parent] = <int>node
                else:
                    right[parent] = <int>node
            m = end - start
            best_f = -1
            best_thr = 0.0
            if not (
                m < min_samples_split
                or (max_depth >= 0 and depth >= max_depth)
            ):
                s_p = 0.0
                for ii in range(start, end):
                    s_p += grad[idx[ii]]
                t1 = s_p * s_p
                parent_proxy = t1 / <double>m
                best_proxy = parent_proxy
                for f in range(d):
                    lo = X[idx[start], f]
                    hi = lo
                    for ii in range(start + 1, end):
                        x = X[idx[ii], f]
                        if x < lo:
                            lo = x
                        if x > hi:
                            hi = x
                    if lo == hi:
                        continue
                    for ii in range(m):
                        pairs[ii].v = X[idx[start + ii], f]
                        pairs[ii].pos = ii
                    qsort(
                        pairs, <size_t>m, sizeof(afsdf_sortpair),
                        afsdf_sortpair_cmp,
                    )
                    totg = 0.0
                    for ii in range(m):
                        totg += grad[idx[start + pairs[ii].pos]]
                    sl = 0.0
                    for ii in range(m - 1):
                        sl += grad[idx[start + pairs[ii].pos]]
                        if pairs[ii].v < pairs[ii + 1].v:
                            nl_i = ii + 1
                            nr_i = m - nl_i
                            if nl_i >= min_samples_leaf and nr_i >= min_samples_leaf:
                                sr = totg - sl
                                nl_d = <double>nl_i
                                nr_d = <double>nr_i
                                t1 = (sl * sl) / nl_d
                                t2 = (sr * sr) / nr_d
                                proxy = t1 + t2
                                if proxy > best_proxy:
                                    best_proxy = proxy
                                    best_f = f
                                    thr = (pairs[ii].v + pairs[ii + 1].v) / 2.0
                                    if thr == pairs[ii + 1].v:
                                        thr = pairs[ii].v
                                    best_thr = thr
                if best_f >= 0:
                    tdelta = best_proxy - parent_proxy
                    imp[best_f] = imp[best_f] + tdelta
            if best_f < 0:
                s_g = 0.0
                s_h = 0.0
                for ii in range(start, end):
                    row = idx[ii]
                    s_g += grad[row]
                    s_h += hess[row]
                if s_h < hessian_floor:
                    s_h = hessian_floor
                leaf_value[node] = s_g / s_h
            else:
                feature[node] = <int>best_f
                threshold[node] = best_thr
                n_left = 0
                for ii in range(start, end):
                    row = idx[ii]
                    if X[row, best_f] <= best_thr:
                        tmp[n_left] = row
                        n_left += 1
                jj = n_left
                for ii in range(start, end):
                    row = idx[ii]
                    if not (X[row, best_f] <= best_thr):
                        tmp[jj] = row
                        jj += 1
                for ii in range(m):
                    idx[start + ii] = tmp[ii]
                mid = start + n_left
                stack[sp].start = mid
                stack[sp].end = end
                stack[sp].depth = depth + 1
                stack[sp].parent = node
                stack[sp].is_left = 0
                sp += 1
                stack[sp].start = start
                stack[sp].end = mid
                stack[sp].depth = depth + 1
                stack[sp].parent = node
                stack[sp].is_left = 1
                sp += 1

    free(idx); free(tmp); free(pairs); free(stack)
    return (
        feature_arr[:n_nodes].copy(),
        threshold_arr[:n_nodes].copy(),
        left_arr[:n_nodes].copy(),
        right_arr[:n_nodes].copy(),
        leaf_value_arr[:n_nodes].copy(),
        imp_arr,
    )


def route_samples(
    double[:, ::1] X,
    int[::1] feature,
    double[::1] threshold,
    int[::1] left,
    int[::1] right,
):
    """Leaf node id for every row."""
    cdef long long n = X.shape[0]
    out_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef long long i
    cdef int node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = node
    return out_arr
