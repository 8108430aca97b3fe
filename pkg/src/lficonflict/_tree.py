"""Compiled kernels for growing and querying regression trees.

Trees live in flat arrays. feature[i] >= 0 marks an internal node with a
threshold and two children; feature[i] == -1 marks a leaf owning the row
indices leaf_rows[leaf_start[i] : leaf_start[i] + leaf_count[i]]. A forest
concatenates the per-tree arrays, with tree t rooted at tree_offset[t] and
child/leaf indices already shifted to the concatenated layout.

Split search is exhaustive over midpoints of distinct in-node values of the
mtry sampled features, minimising the summed child residual sums of squares.
Candidates are scanned in increasing (feature, threshold) order and replaced
only on strict improvement, so ties resolve to the smallest pair. The
arithmetic (sequential prefix sums, identical score expression) is mirrored
by the brute-force reference implementation in the test suite; keep the two
in sync.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

__all__ = ["grow_tree", "query_weights", "apply_forest", "leaf_means", "batch_quantiles"]


@njit(cache=True)
def grow_tree(X, y, inbag, mtry, min_node_size, max_depth, seed):
    """Grow one tree on the given in-bag rows; returns trimmed flat arrays.

    A node becomes a leaf when it has at most min_node_size rows, is pure,
    sits at max_depth (0 means unlimited), or no sampled feature varies.
    """
    m = inbag.shape[0]
    q = X.shape[1]
    max_nodes = 2 * m + 1

    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    leaf_start = np.full(max_nodes, -1, np.int64)
    leaf_count = np.zeros(max_nodes, np.int64)
    rows = inbag.copy()

    np.random.seed(seed)

    stack_node = np.empty(max_nodes, np.int64)
    stack_start = np.empty(max_nodes, np.int64)
    stack_end = np.empty(max_nodes, np.int64)
    stack_depth = np.empty(max_nodes, np.int64)
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = m
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    feat_perm = np.empty(q, np.int64)
    xs = np.empty(m, np.float64)
    ys = np.empty(m, np.float64)
    tmp = np.empty(m, np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        size = end - start

        is_leaf = size <= min_node_size
        if not is_leaf and max_depth > 0 and depth >= max_depth:
            is_leaf = True
        if not is_leaf:
            pure = True
            y0 = y[rows[start]]
            for i in range(start + 1, end):
                if y[rows[i]] != y0:
                    pure = False
                    break
            is_leaf = pure

        best_feat = -1
        best_thr = 0.0
        best_score = np.inf
        best_nl = 0

        if not is_leaf:
            k = mtry if mtry < q else q
            for j in range(q):
                feat_perm[j] = j
            for j in range(k):
                r = j + np.random.randint(0, q - j)
                t = feat_perm[j]
                feat_perm[j] = feat_perm[r]
                feat_perm[r] = t
            # ascending feature order makes the strict-improvement scan pick
            # the lexicographically smallest (feature, threshold) among ties
            for a in range(1, k):
                v = feat_perm[a]
                b = a - 1
                while b >= 0 and feat_perm[b] > v:
                    feat_perm[b + 1] = feat_perm[b]
                    b -= 1
                feat_perm[b + 1] = v

            for jj in range(k):
                f = feat_perm[jj]
                for i in range(size):
                    xs[i] = X[rows[start + i], f]
                order = np.argsort(xs[:size], kind="mergesort")
                for i in range(size):
                    ys[i] = y[rows[start + order[i]]]
                s_tot = 0.0
                s2_tot = 0.0
                for i in range(size):
                    s_tot += ys[i]
                    s2_tot += ys[i] * ys[i]
                s_l = 0.0
                s2_l = 0.0
                for i in range(1, size):
                    yv = ys[i - 1]
                    s_l += yv
                    s2_l += yv * yv
                    xa = xs[order[i - 1]]
                    xb = xs[order[i]]
                    if xb <= xa:
                        continue
                    nl = float(i)
                    nr = float(size - i)
                    score = (s2_l - s_l * s_l / nl) + (
                        (s2_tot - s2_l) - (s_tot - s_l) * (s_tot - s_l) / nr
                    )
                    if score < best_score:
                        best_score = score
                        best_feat = f
                        best_thr = 0.5 * (xa + xb)
                        best_nl = i

        if is_leaf or best_feat < 0:
            leaf_start[node] = start
            leaf_count[node] = size
            continue

        # repartition rows[start:end] so the left block precedes the right
        for i in range(size):
            xs[i] = X[rows[start + i], best_feat]
        order = np.argsort(xs[:size], kind="mergesort")
        for i in range(size):
            tmp[i] = rows[start + order[i]]
        for i in range(size):
            rows[start + i] = tmp[i]

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        mid = start + best_nl

        stack_node[top] = lnode
        stack_start[top] = start
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = rnode
        stack_start[top] = mid
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        leaf_start[:n_nodes].copy(),
        leaf_count[:n_nodes].copy(),
        rows,
    )


@njit(cache=True)
def query_weights(feature, threshold, left, right, leaf_start, leaf_count, leaf_rows, tree_offset, x, n_train):
    """Leaf-frequency weights of one query point over the training rows."""
    w = np.zeros(n_train, np.float64)
    n_trees = tree_offset.shape[0] - 1
    inv = 1.0 / n_trees
    for t in range(n_trees):
        node = tree_offset[t]
        while feature[node] >= 0:
            if x[feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        c = leaf_count[node]
        share = inv / c
        s = leaf_start[node]
        for i in range(s, s + c):
            w[leaf_rows[i]] += share
    return w


@njit(cache=True)
def apply_forest(feature, threshold, left, right, tree_offset, X):
    """Leaf node index of every query row under every tree; (n_trees, n_query)."""
    nq = X.shape[0]
    n_trees = tree_offset.shape[0] - 1
    out = np.empty((n_trees, nq), np.int64)
    for t in range(n_trees):
        root = tree_offset[t]
        for i in range(nq):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[t, i] = node
    return out


@njit(cache=True)
def leaf_means(feature, leaf_start, leaf_count, leaf_rows, y):
    """Mean response of each leaf node (zeros at internal nodes)."""
    n_nodes = feature.shape[0]
    out = np.zeros(n_nodes, np.float64)
    for node in range(n_nodes):
        if feature[node] < 0:
            s = leaf_start[node]
            c = leaf_count[node]
            acc = 0.0
            for i in range(s, s + c):
                acc += y[leaf_rows[i]]
            out[node] = acc / c
    return out


@njit(cache=True, parallel=True)
def batch_quantiles(
    feature,
    threshold,
    left,
    right,
    leaf_start,
    leaf_count,
    leaf_rows,
    tree_offset,
    Xq,
    levels,
    y_order,
    y_sorted,
):
    """Generalized-inverse weighted quantiles for a batch of query rows.

    levels must be sorted ascending; y_order/y_sorted give the training
    responses in nondecreasing order.
    """
    nq = Xq.shape[0]
    nl = levels.shape[0]
    n_train = y_order.shape[0]
    n_trees = tree_offset.shape[0] - 1
    inv = 1.0 / n_trees
    out = np.empty((nq, nl), np.float64)
    for iq in prange(nq):
        w = np.zeros(n_train, np.float64)
        for t in range(n_trees):
            node = tree_offset[t]
            while feature[node] >= 0:
                if Xq[iq, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            c = leaf_count[node]
            share = inv / c
            s = leaf_start[node]
            for i in range(s, s + c):
                w[leaf_rows[i]] += share
        li = 0
        cum = 0.0
        for i in range(n_train):
            cum += w[y_order[i]]
            while li < nl and cum >= levels[li]:
                out[iq, li] = y_sorted[i]
                li += 1
            if li == nl:
                break
        # float shortfall of the cumulative sum: highest response stands in
        while li < nl:
            out[iq, li] = y_sorted[n_train - 1]
            li += 1
    return out
