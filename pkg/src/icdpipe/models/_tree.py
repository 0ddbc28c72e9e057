"""Compiled CART kernels shared by the forest and boosting models.

Numba compiles these once per process (disk-cached afterward); everything
here is deliberately loop-based.  Split convention: x <= threshold goes
left.  Thresholds are midpoints between consecutive distinct sorted values
and a split must strictly reduce the node criterion.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NO_FEATURE = -1
_GAIN_EPS = 1e-12


@njit(cache=True)
def _sm64(state: np.uint64) -> tuple[np.uint64, np.uint64]:
    s = state + np.uint64(0x9E3779B97F4A7C15)
    z = s
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return s, z


@njit(cache=True)
def grow_classification_tree(
    X, y, idx, max_depth, min_leaf, n_feat_split, seed,
    feature, threshold, left, right, value, importance,
):
    """Gini CART on rows X[idx]; returns the node count.

    Output arrays must be preallocated with >= 2*len(idx) slots.  ``value``
    holds the class-1 fraction at every node; ``importance`` accumulates
    row-weighted impurity decrease per feature (caller normalizes).
    """
    m = idx.shape[0]
    p = X.shape[1]
    work = idx.copy()
    perm = np.empty(p, dtype=np.int64)
    buf = np.empty(m, dtype=np.int64)
    stack_node = np.empty(2 * m + 2, dtype=np.int64)
    stack_lo = np.empty(2 * m + 2, dtype=np.int64)
    stack_hi = np.empty(2 * m + 2, dtype=np.int64)
    stack_depth = np.empty(2 * m + 2, dtype=np.int64)

    rng = seed
    n_nodes = 1
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m
    stack_depth[0] = 0

    while top >= 0:
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        top -= 1
        m_node = hi - lo

        pos = 0.0
        for t in range(lo, hi):
            pos += y[work[t]]
        frac = pos / m_node
        value[node] = frac
        feature[node] = NO_FEATURE
        left[node] = -1
        right[node] = -1

        if frac == 0.0 or frac == 1.0:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if m_node < 2 * min_leaf:
            continue

        gini_parent = 2.0 * frac * (1.0 - frac)

        for i in range(p):
            perm[i] = i
        k = n_feat_split if n_feat_split < p else p
        for i in range(k):
            rng, draw = _sm64(rng)
            j = i + np.int64(draw % np.uint64(p - i))
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp

        best_gain = _GAIN_EPS
        best_feat = -1
        best_thr = 0.0
        vals = np.empty(m_node, dtype=np.float64)
        ysort = np.empty(m_node, dtype=np.float64)
        for fi in range(k):
            f = perm[fi]
            for t in range(m_node):
                vals[t] = X[work[lo + t], f]
            order = np.argsort(vals)
            for t in range(m_node):
                ysort[t] = y[work[lo + order[t]]]
            cum_pos = 0.0
            for t in range(m_node - 1):
                cum_pos += ysort[t]
                if vals[order[t + 1]] == vals[order[t]]:
                    continue
                nl = t + 1
                nr = m_node - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                fl = cum_pos / nl
                fr = (pos - cum_pos) / nr
                child = (nl * 2.0 * fl * (1.0 - fl) + nr * 2.0 * fr * (1.0 - fr)) / m_node
                gain = gini_parent - child
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (vals[order[t]] + vals[order[t + 1]])

        if best_feat < 0:
            continue

        nl = 0
        nr = 0
        for t in range(lo, hi):
            if X[work[t], best_feat] <= best_thr:
                work[lo + nl] = work[t]
                nl += 1
            else:
                buf[nr] = work[t]
                nr += 1
        for t in range(nr):
            work[lo + nl + t] = buf[t]

        importance[best_feat] += m_node * best_gain
        feature[node] = best_feat
        threshold[node] = best_thr
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        top += 1
        stack_node[top] = rchild
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lchild
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_depth[top] = depth + 1

    return n_nodes


@njit(cache=True)
def grow_regression_tree(
    X, g, h, max_depth, min_leaf,
    feature, threshold, left, right, value, importance,
):
    """Least-squares CART on gradient targets g; returns the node count.

    Every row participates (no bootstrap, all features per split).  Leaf
    values are the damped Newton step sum(g)/(sum(h) + eps) so the caller
    can add shrinkage * value directly to the raw score.
    """
    m = X.shape[0]
    p = X.shape[1]
    work = np.arange(m)
    buf = np.empty(m, dtype=np.int64)
    stack_node = np.empty(2 * m + 2, dtype=np.int64)
    stack_lo = np.empty(2 * m + 2, dtype=np.int64)
    stack_hi = np.empty(2 * m + 2, dtype=np.int64)
    stack_depth = np.empty(2 * m + 2, dtype=np.int64)

    n_nodes = 1
    top = 0
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = m
    stack_depth[0] = 0

    while top >= 0:
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        depth = stack_depth[top]
        top -= 1
        m_node = hi - lo

        sum_g = 0.0
        sum_h = 0.0
        sum_g2 = 0.0
        for t in range(lo, hi):
            sum_g += g[work[t]]
            sum_h += h[work[t]]
            sum_g2 += g[work[t]] * g[work[t]]
        value[node] = sum_g / (sum_h + 1e-12)
        feature[node] = NO_FEATURE
        left[node] = -1
        right[node] = -1

        if max_depth >= 0 and depth >= max_depth:
            continue
        if m_node < 2 * min_leaf:
            continue
        sse_parent = sum_g2 - sum_g * sum_g / m_node
        if sse_parent <= _GAIN_EPS:
            continue

        best_gain = _GAIN_EPS
        best_feat = -1
        best_thr = 0.0
        vals = np.empty(m_node, dtype=np.float64)
        gsort = np.empty(m_node, dtype=np.float64)
        for f in range(p):
            for t in range(m_node):
                vals[t] = X[work[lo + t], f]
            order = np.argsort(vals)
            for t in range(m_node):
                gsort[t] = g[work[lo + order[t]]]
            cum_g = 0.0
            for t in range(m_node - 1):
                cum_g += gsort[t]
                if vals[order[t + 1]] == vals[order[t]]:
                    continue
                nl = t + 1
                nr = m_node - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                rg = sum_g - cum_g
                child_sse = sum_g2 - cum_g * cum_g / nl - rg * rg / nr
                gain = sse_parent - child_sse
                if gain > best_gain:
                    best_gain = gain
                    best_feat = f
                    best_thr = 0.5 * (vals[order[t]] + vals[order[t + 1]])

        if best_feat < 0:
            continue

        nl = 0
        nr = 0
        for t in range(lo, hi):
            if X[work[t], best_feat] <= best_thr:
                work[lo + nl] = work[t]
                nl += 1
            else:
                buf[nr] = work[t]
                nr += 1
        for t in range(nr):
            work[lo + nl + t] = buf[t]

        importance[best_feat] += best_gain
        feature[node] = best_feat
        threshold[node] = best_thr
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        top += 1
        stack_node[top] = rchild
        stack_lo[top] = lo + nl
        stack_hi[top] = hi
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = lchild
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_depth[top] = depth + 1

    return n_nodes


@njit(cache=True)
def eval_tree(X, feature, threshold, left, right, value, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
