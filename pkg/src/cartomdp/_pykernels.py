"""Pure Python / numpy versions of the hot kernels (fallback backend)."""
from __future__ import annotations

import numpy as np

INF = np.int64(1) << 62


def minplus_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Min-plus product of int64 matrices; entries >= INF mean "no edge"."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    n, m = a.shape
    out = np.full((n, b.shape[1]), INF, dtype=np.int64)
    for k in range(m):
        col = a[:, k]
        row = b[k, :]
        ok_c = col < INF
        ok_r = row < INF
        if not ok_c.any() or not ok_r.any():
            continue
        cand = col[ok_c, None] + row[None, ok_r]
        sub = out[np.ix_(ok_c, ok_r)]
        out[np.ix_(ok_c, ok_r)] = np.minimum(sub, cand)
    return out


def tree_eval_grad(var_ptr, child_ptr, child, prob, x, leaf_p, leaf_q):
    """Evaluate two multilinear tree polynomials and their gradients.

    Nodes are numbered so that parents precede children. Node ``v`` owns the
    variables ``var_ptr[v]:var_ptr[v+1]`` (none for leaves); variable ``j``
    leads to ``child[child_ptr[j]:child_ptr[j+1]]`` with weights ``prob``.
    Returns ``(P, Q, dP/dx, dQ/dx)``.
    """
    var_ptr = list(var_ptr)
    child_ptr = list(child_ptr)
    child = list(child)
    prob = list(prob)
    x = list(x)
    m = len(var_ptr) - 1
    vp = list(leaf_p)
    vq = list(leaf_q)
    nvar = len(x)
    sp = [0.0] * nvar
    sq = [0.0] * nvar
    for v in range(m - 1, -1, -1):
        lo, hi = var_ptr[v], var_ptr[v + 1]
        if lo == hi:
            continue
        tp = tq = 0.0
        for j in range(lo, hi):
            ap = aq = 0.0
            for c in range(child_ptr[j], child_ptr[j + 1]):
                w = prob[c]
                ap += w * vp[child[c]]
                aq += w * vq[child[c]]
            sp[j] = ap
            sq[j] = aq
            tp += x[j] * ap
            tq += x[j] * aq
        vp[v] = tp
        vq[v] = tq
    reach = [0.0] * m
    if m:
        reach[0] = 1.0
    gp = [0.0] * nvar
    gq = [0.0] * nvar
    for v in range(m):
        r = reach[v]
        for j in range(var_ptr[v], var_ptr[v + 1]):
            gp[j] = r * sp[j]
            gq[j] = r * sq[j]
            rx = r * x[j]
            for c in range(child_ptr[j], child_ptr[j + 1]):
                reach[child[c]] += rx * prob[c]
    return (vp[0] if m else 0.0), (vq[0] if m else 0.0), np.array(gp), np.array(gq)
