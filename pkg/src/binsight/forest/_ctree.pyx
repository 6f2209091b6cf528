# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CART kernel: tree growth and routing.

Semantics are defined by ``_pytree.py``; this module must produce
identical arrays for identical inputs, including RNG consumption.
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint8_t, uint64_t, int64_t, int32_t
from libc.stdlib cimport qsort

cnp.import_array()

cdef extern from *:
    """
    typedef unsigned __int128 bs_u128;
    static inline int bs_frac_gt(unsigned long long a, unsigned long long b,
                                 unsigned long long c, unsigned long long d) {
        /* a/b > c/d for positive b, d */
        return (bs_u128)a * d > (bs_u128)c * b;
    }
    """
    int bs_frac_gt(unsigned long long a, unsigned long long b,
                   unsigned long long c, unsigned long long d) nogil

cdef enum:
    SMALL_NODE = 64
    NVALUES = 256

cdef inline uint64_t _next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _randbelow(uint64_t* state, uint64_t n) noexcept nogil:
    cdef uint64_t threshold = (<uint64_t>0 - n) % n
    cdef uint64_t r
    while True:
        r = _next(state)
        if r >= threshold:
            return r % n


cdef int _cmp_int64(const void* a, const void* b) noexcept nogil:
    cdef int64_t x = (<int64_t*>a)[0]
    cdef int64_t y = (<int64_t*>b)[0]
    return (x > y) - (x < y)


cdef struct Split:
    int found
    int64_t feature
    int64_t value_lo
    int64_t value_hi
    int64_t n_left
    uint64_t num     # SL*nR + SR*nL
    uint64_t den     # nL*nR


cdef struct Scratch:
    int64_t* hist        # NVALUES * k
    int64_t* tot         # NVALUES
    int64_t* present     # NVALUES
    int64_t* left        # k
    int64_t* vals        # m (small-node sort buffer: value*k + class)


cdef inline void _offer(Split* best, int64_t f, int64_t lo, int64_t hi, int64_t nl,
                        int64_t nr, int64_t sl, int64_t sr) noexcept nogil:
    cdef uint64_t num = <uint64_t>(sl * nr + sr * nl)
    cdef uint64_t den = <uint64_t>(nl * nr)
    if not best.found or bs_frac_gt(num, den, best.num, best.den):
        best.found = 1
        best.feature = f
        best.value_lo = lo
        best.value_hi = hi
        best.n_left = nl
        best.num = num
        best.den = den


cdef void _scan_feature(const uint8_t[:, ::1] X, const int64_t[::1] y, int64_t* samples,
                        int64_t m, int64_t f, int64_t k, const int64_t* totals,
                        int64_t s_total, int64_t min_node, Scratch* sc,
                        Split* best) noexcept nogil:
    cdef int64_t i, j, v, c, h, r, nl, npresent, sl, sr, code
    sl = 0
    sr = s_total
    for c in range(k):
        sc.left[c] = 0
    nl = 0
    if m <= SMALL_NODE:
        for i in range(m):
            sc.vals[i] = <int64_t>X[samples[i], f] * k + y[samples[i]]
        qsort(sc.vals, m, sizeof(int64_t), _cmp_int64)
        for i in range(m - 1):
            code = sc.vals[i]
            c = code % k
            r = totals[c] - sc.left[c]
            sr -= 2 * r - 1
            sl += 2 * sc.left[c] + 1
            sc.left[c] += 1
            nl += 1
            v = code // k
            j = sc.vals[i + 1] // k
            if v != j and nl >= min_node and m - nl >= min_node:
                _offer(best, f, v, j, nl, m - nl, sl, sr)
        return

    for i in range(m):
        v = X[samples[i], f]
        sc.hist[v * k + y[samples[i]]] += 1
        sc.tot[v] += 1
    npresent = 0
    for v in range(NVALUES):
        if sc.tot[v] > 0:
            sc.present[npresent] = v
            npresent += 1
    for i in range(npresent - 1):
        v = sc.present[i]
        for c in range(k):
            h = sc.hist[v * k + c]
            if h > 0:
                r = totals[c] - sc.left[c]
                sr += h * h - 2 * r * h
                sl += h * h + 2 * sc.left[c] * h
                sc.left[c] += h
        nl += sc.tot[v]
        if nl >= min_node and m - nl >= min_node:
            _offer(best, f, v, sc.present[i + 1], nl, m - nl, sl, sr)
    for i in range(m):
        v = X[samples[i], f]
        sc.hist[v * k + y[samples[i]]] = 0
        sc.tot[v] = 0


cdef void _best_split(const uint8_t[:, ::1] X, const int64_t[::1] y, int64_t* samples,
                      int64_t m, const int64_t* features, int64_t nfeat, int64_t k,
                      const int64_t* totals, int64_t min_node, Scratch* sc,
                      Split* best) noexcept nogil:
    cdef int64_t i, c, s_total = 0
    for c in range(k):
        s_total += totals[c] * totals[c]
    best.found = 0
    for i in range(nfeat):
        _scan_feature(X, y, samples, m, features[i], k, totals, s_total, min_node, sc, best)
    # Zero-gain splits are rejected: require num/den > s_total/m exactly.
    if best.found and not bs_frac_gt(best.num, best.den, <uint64_t>s_total, <uint64_t>m):
        best.found = 0


def find_split(const uint8_t[:, ::1] X, const int64_t[::1] y, int64_t[::1] samples,
               const int64_t[::1] features, int64_t n_classes, int64_t min_node=1):
    """Best split over ``features`` (ascending) for the given sample multiset.

    Returns ``None`` or ``(feature, lo_value, hi_value, n_left, num, den)``.
    """
    cdef int64_t m = samples.shape[0]
    cdef int64_t k = n_classes
    cdef int64_t i
    cdef Split best
    cdef Scratch sc
    if m < 2 or features.shape[0] == 0:
        return None
    hist = np.zeros(NVALUES * k, dtype=np.int64)
    tot = np.zeros(NVALUES, dtype=np.int64)
    present = np.zeros(NVALUES, dtype=np.int64)
    left = np.zeros(k, dtype=np.int64)
    vals = np.zeros(max(m, 1), dtype=np.int64)
    totals = np.zeros(k, dtype=np.int64)
    cdef int64_t[::1] hist_v = hist, tot_v = tot, present_v = present, left_v = left
    cdef int64_t[::1] vals_v = vals, totals_v = totals
    for i in range(m):
        totals_v[y[samples[i]]] += 1
    sc.hist = &hist_v[0]
    sc.tot = &tot_v[0]
    sc.present = &present_v[0]
    sc.left = &left_v[0]
    sc.vals = &vals_v[0]
    _best_split(X, y, &samples[0], m, &features[0], features.shape[0], k, &totals_v[0],
                min_node, &sc, &best)
    if not best.found:
        return None
    return (int(best.feature), int(best.value_lo), int(best.value_hi), int(best.n_left),
            int(best.num), int(best.den))


def build_tree(const uint8_t[:, ::1] X, const int64_t[::1] y, samples_in,
               int64_t n_classes, int64_t mtry, int64_t min_node, int64_t max_depth,
               uint64_t rng_state):
    """Grow one CART tree; see ``_pytree.build_tree`` for the contract."""
    cdef int64_t[::1] samples = np.array(samples_in, dtype=np.int64)
    cdef int64_t m = samples.shape[0]
    cdef int64_t p = X.shape[1]
    cdef int64_t k = n_classes
    cdef int64_t cap = 2 * m - 1 if m > 0 else 1

    feature_a = np.full(cap, -1, dtype=np.int32)
    threshold_a = np.zeros(cap, dtype=np.float64)
    left_a = np.full(cap, -1, dtype=np.int32)
    right_a = np.full(cap, -1, dtype=np.int32)
    leaf_a = np.full(cap, -1, dtype=np.int32)
    counts_a = np.zeros((max(m, 1), k), dtype=np.int32)
    cdef int32_t[::1] feature = feature_a, left = left_a, right = right_a, leaf = leaf_a
    cdef double[::1] threshold = threshold_a
    cdef int32_t[:, ::1] counts = counts_a

    stack_a = np.zeros((m + 1, 5), dtype=np.int64)
    cdef int64_t[:, ::1] stack = stack_a
    hist = np.zeros(NVALUES * k, dtype=np.int64)
    tot = np.zeros(NVALUES, dtype=np.int64)
    present = np.zeros(NVALUES, dtype=np.int64)
    lbuf = np.zeros(k, dtype=np.int64)
    vals = np.zeros(max(m, 1), dtype=np.int64)
    totals_a = np.zeros(k, dtype=np.int64)
    pool_a = np.zeros(max(p, 1), dtype=np.int64)
    cdef int64_t[::1] hist_v = hist, tot_v = tot, present_v = present, lbuf_v = lbuf
    cdef int64_t[::1] vals_v = vals, totals = totals_a, pool = pool_a

    cdef Scratch sc
    cdef Split best
    cdef uint64_t state = rng_state
    cdef int64_t top = 0, n_nodes = 0, n_leaves = 0
    cdef int64_t start, end, depth, parent, side, node, nm, c, i, j, tmp, nclass, nfeat
    cdef int64_t lo, hi, s, f, cut
    cdef double thr

    sc.hist = &hist_v[0]
    sc.tot = &tot_v[0]
    sc.present = &present_v[0]
    sc.left = &lbuf_v[0]
    sc.vals = &vals_v[0]

    if m == 0:
        raise ValueError("cannot grow a tree on zero samples")

    with nogil:
        stack[0, 0] = 0
        stack[0, 1] = m
        stack[0, 2] = 0
        stack[0, 3] = -1
        stack[0, 4] = 0
        top = 1
        while top > 0:
            top -= 1
            start = stack[top, 0]
            end = stack[top, 1]
            depth = stack[top, 2]
            parent = stack[top, 3]
            side = stack[top, 4]
            node = n_nodes
            n_nodes += 1
            if parent >= 0:
                if side == 0:
                    left[parent] = <int32_t>node
                else:
                    right[parent] = <int32_t>node
            nm = end - start
            for c in range(k):
                totals[c] = 0
            for i in range(start, end):
                totals[y[samples[i]]] += 1
            nclass = 0
            for c in range(k):
                if totals[c] > 0:
                    nclass += 1

            best.found = 0
            if nclass > 1 and nm >= 2 * min_node and (max_depth < 0 or depth < max_depth):
                if mtry >= p:
                    for j in range(p):
                        pool[j] = j
                    nfeat = p
                else:
                    for j in range(p):
                        pool[j] = j
                    for i in range(mtry):
                        j = i + <int64_t>_randbelow(&state, <uint64_t>(p - i))
                        tmp = pool[i]
                        pool[i] = pool[j]
                        pool[j] = tmp
                    qsort(&pool[0], mtry, sizeof(int64_t), _cmp_int64)
                    nfeat = mtry
                _best_split(X, y, &samples[start], nm, &pool[0], nfeat, k, &totals[0],
                            min_node, &sc, &best)

            if not best.found:
                leaf[node] = <int32_t>n_leaves
                for c in range(k):
                    counts[n_leaves, c] = <int32_t>totals[c]
                n_leaves += 1
                continue

            f = best.feature
            lo = best.value_lo
            hi = best.value_hi
            thr = (<double>lo + <double>hi) / 2.0
            feature[node] = <int32_t>f
            threshold[node] = thr
            # Partition samples[start:end] so that X[s, f] <= lo comes first.
            i = start
            j = end - 1
            while i <= j:
                if X[samples[i], f] <= lo:
                    i += 1
                else:
                    tmp = samples[i]
                    samples[i] = samples[j]
                    samples[j] = tmp
                    j -= 1
            cut = i
            stack[top, 0] = cut
            stack[top, 1] = end
            stack[top, 2] = depth + 1
            stack[top, 3] = node
            stack[top, 4] = 1
            top += 1
            stack[top, 0] = start
            stack[top, 1] = cut
            stack[top, 2] = depth + 1
            stack[top, 3] = node
            stack[top, 4] = 0
            top += 1

    return (feature_a[:n_nodes].copy(), threshold_a[:n_nodes].copy(),
            left_a[:n_nodes].copy(), right_a[:n_nodes].copy(),
            leaf_a[:n_nodes].copy(), counts_a[:n_leaves].copy(), state)


def apply_tree(const int32_t[::1] feature, const double[::1] threshold,
               const int32_t[::1] left, const int32_t[::1] right,
               const uint8_t[:, ::1] X):
    """Index of the leaf node each row of ``X`` is routed to."""
    cdef Py_ssize_t n = X.shape[0], r
    cdef int32_t node, f
    out_a = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] out = out_a
    with nogil:
        for r in range(n):
            node = 0
            f = feature[node]
            while f >= 0:
                if X[r, f] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
            out[r] = node
    return out_a


def add_votes(const int32_t[::1] feature, const double[::1] threshold,
              const int32_t[::1] left, const int32_t[::1] right,
              const int64_t[::1] node_class, const uint8_t[:, ::1] X,
              int64_t[:, ::1] votes):
    """Route every row and add one vote for the reached leaf's class."""
    cdef Py_ssize_t n = X.shape[0], r
    cdef int32_t node, f
    with nogil:
        for r in range(n):
            node = 0
            f = feature[node]
            while f >= 0:
                if X[r, f] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
                f = feature[node]
            votes[r, node_class[node]] += 1
