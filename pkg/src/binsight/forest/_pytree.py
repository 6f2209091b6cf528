"""Pure-Python (numpy) CART kernel.

This is the reference semantics for the compiled ``_ctree`` extension;
both must return identical arrays and leave the RNG in the same state.

Split quality
-------------
For a candidate with left/right class counts ``L``, ``R`` (sizes ``nL``,
``nR``), minimizing the weighted child Gini impurity is the same as
maximizing ``SL/nL + SR/nR`` with ``SL = sum(L**2)``, ``SR = sum(R**2)``.
Candidates are compared as exact fractions ``num/den`` with
``num = SL*nR + SR*nL`` and ``den = nL*nR``, so ties are real ties and
resolve to the lowest feature index, then the lowest threshold.
A split is accepted only if ``num/den > S/m`` (strictly positive gain),
where ``S = sum(T**2)`` over the node's class totals ``T``.

Trees are stored as flat preorder arrays: node 0 is the root and the left
child of an internal node ``i`` is ``i + 1``.
"""

from __future__ import annotations

import numpy as np

from ..rng import Rng

NVALUES = 256


def find_split(X, y, samples, features, n_classes, min_node=1):
    """Best split over ``features`` (ascending) for the sample multiset.

    Returns ``None`` or ``(feature, lo_value, hi_value, n_left, num, den)``;
    the threshold is the midpoint of ``lo_value`` and ``hi_value``.
    """
    samples = np.asarray(samples, dtype=np.int64)
    feats = np.asarray(features, dtype=np.int64)
    m = len(samples)
    if m < 2 or len(feats) == 0:
        return None
    k = n_classes
    ys = y[samples]
    totals = np.bincount(ys, minlength=k).astype(np.int64)
    s_total = int((totals * totals).sum())

    vals = X[samples[:, None], feats[None, :]].astype(np.int64)
    codes = (np.arange(len(feats))[None, :] * NVALUES + vals) * k + ys[:, None]
    hist = np.bincount(codes.ravel(), minlength=len(feats) * NVALUES * k)
    hist = hist.reshape(len(feats), NVALUES, k)
    cum = np.cumsum(hist, axis=1)
    present = hist.sum(axis=2) > 0

    cand_f, cand_lo, cand_hi, cand_L = [], [], [], []
    for fi in range(len(feats)):
        pv = np.flatnonzero(present[fi])
        if len(pv) < 2:
            continue
        cand_f.append(np.full(len(pv) - 1, fi))
        cand_lo.append(pv[:-1])
        cand_hi.append(pv[1:])
        cand_L.append(cum[fi, pv[:-1]])
    if not cand_f:
        return None
    cf = np.concatenate(cand_f)
    clo = np.concatenate(cand_lo)
    chi = np.concatenate(cand_hi)
    L = np.concatenate(cand_L).astype(np.int64)
    nl = L.sum(axis=1)
    nr = m - nl
    valid = (nl >= min_node) & (nr >= min_node)
    if not valid.any():
        return None
    cf, clo, chi, L, nl, nr = cf[valid], clo[valid], chi[valid], L[valid], nl[valid], nr[valid]
    R = totals[None, :] - L
    sl = (L * L).sum(axis=1)
    sr = (R * R).sum(axis=1)
    num = sl * nr + sr * nl
    den = nl * nr

    # Float ranking narrows the field; the winner is settled exactly.
    score = num / den
    top = score.max()
    near = np.flatnonzero(score >= top - abs(top) * 1e-9)
    best = int(near[0])
    for i in near[1:]:
        if int(num[i]) * int(den[best]) > int(num[best]) * int(den[i]):
            best = int(i)
    bnum, bden = int(num[best]), int(den[best])
    if not bnum * m > s_total * bden:
        return None
    return (int(feats[cf[best]]), int(clo[best]), int(chi[best]), int(nl[best]), bnum, bden)


def build_tree(X, y, samples, n_classes, mtry, min_node, max_depth, rng_state):
    """Grow one tree depth-first.

    A node becomes a leaf when it is pure, holds fewer than
    ``2 * min_node`` samples, sits at ``max_depth`` (``-1`` = unlimited) or
    no split over its feature subset has positive gain.  The feature subset
    (``mtry`` of ``X.shape[1]``, drawn without replacement) is drawn only
    for nodes that pass the first three checks.

    Returns ``(feature, threshold, left, right, leaf, counts, rng_state)``.
    """
    samples = np.asarray(samples, dtype=np.int64)
    m = len(samples)
    if m == 0:
        raise ValueError("cannot grow a tree on zero samples")
    p = X.shape[1]
    k = n_classes
    rng = Rng(rng_state)

    feature, threshold, left, right, leaf, counts = [], [], [], [], [], []
    stack = [(samples, 0, -1, 0)]
    while stack:
        seg, depth, parent, side = stack.pop()
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf.append(-1)
        if parent >= 0:
            (left if side == 0 else right)[parent] = node
        totals = np.bincount(y[seg], minlength=k)

        split = None
        if (np.count_nonzero(totals) > 1 and len(seg) >= 2 * min_node
                and (max_depth < 0 or depth < max_depth)):
            if mtry >= p:
                feats = np.arange(p)
            else:
                feats = np.sort(np.asarray(rng.sample(p, mtry), dtype=np.int64))
            split = find_split(X, y, seg, feats, k, min_node)

        if split is None:
            leaf[node] = len(counts)
            counts.append(totals)
            continue
        f, lo, hi = split[0], split[1], split[2]
        feature[node] = f
        threshold[node] = (lo + hi) / 2.0
        go_left = X[seg, f] <= lo
        stack.append((seg[~go_left], depth + 1, node, 1))
        stack.append((seg[go_left], depth + 1, node, 0))

    return (np.array(feature, dtype=np.int32), np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int32), np.array(right, dtype=np.int32),
            np.array(leaf, dtype=np.int32),
            np.array(counts, dtype=np.int32).reshape(len(counts), k), rng.state)


def apply_tree(feature, threshold, left, right, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        f = feature[node[active]]
        internal = f >= 0
        active = active[internal]
        if not active.size:
            break
        cur = node[active]
        go_left = X[active, feature[cur]] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
    return node


def add_votes(feature, threshold, left, right, node_class, X, votes):
    leaves = apply_tree(feature, threshold, left, right, X)
    np.add.at(votes, (np.arange(X.shape[0]), node_class[leaves]), 1)
