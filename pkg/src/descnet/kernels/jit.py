"""Numba-jitted kernel implementations (see reference.py for semantics)."""

import numpy as np
from numba import njit


@njit(cache=True)
def conv_pool_forward(x, w, b, valid_len):
    B, L, D = x.shape
    win, _, F = w.shape
    pooled = np.zeros((B, F), dtype=x.dtype)
    argmax = np.full((B, F), -1, dtype=np.int64)
    z = np.empty(F, dtype=x.dtype)
    best = np.empty(F, dtype=x.dtype)
    best_t = np.empty(F, dtype=np.int64)
    for i in range(B):
        T = valid_len[i] - win + 1
        if T > L - win + 1:
            T = L - win + 1
        if T <= 0:
            continue
        for f in range(F):
            best[f] = -np.inf
            best_t[f] = -1
        for t in range(T):
            for f in range(F):
                z[f] = b[f]
            for u in range(win):
                for d in range(D):
                    xv = x[i, t + u, d]
                    for f in range(F):
                        z[f] += xv * w[u, d, f]
            for f in range(F):
                if z[f] > best[f]:
                    best[f] = z[f]
                    best_t[f] = t
        for f in range(F):
            if best[f] > 0.0:
                pooled[i, f] = best[f]
                argmax[i, f] = best_t[f]
    return pooled, argmax


@njit(cache=True)
def conv_pool_backward(x, w, g_pooled, argmax):
    B, L, D = x.shape
    win, _, F = w.shape
    g_x = np.zeros_like(x)
    g_w = np.zeros_like(w)
    g_b = np.zeros(F, dtype=x.dtype)
    for i in range(B):
        for f in range(F):
            t = argmax[i, f]
            if t < 0:
                continue
            g = g_pooled[i, f]
            if g == 0.0:
                continue
            g_b[f] += g
            for u in range(win):
                for d in range(D):
                    g_w[u, d, f] += g * x[i, t + u, d]
                    g_x[i, t + u, d] += g * w[u, d, f]
    return g_x, g_w, g_b


@njit(cache=True)
def kmeans_assign(x, centroids):
    N, D = x.shape
    K = centroids.shape[0]
    labels = np.empty(N, dtype=np.int64)
    dists = np.empty(N, dtype=x.dtype)
    for i in range(N):
        best = np.inf
        best_k = 0
        for k in range(K):
            s = 0.0
            for d in range(D):
                diff = x[i, d] - centroids[k, d]
                s += diff * diff
            if s < best:
                best = s
                best_k = k
        labels[i] = best_k
        dists[i] = best
    return labels, dists


@njit(cache=True)
def kmeans_update(x, labels, k):
    N, D = x.shape
    sums = np.zeros((k, D), dtype=x.dtype)
    counts = np.zeros(k, dtype=np.int64)
    for i in range(N):
        lab = labels[i]
        counts[lab] += 1
        for d in range(D):
            sums[lab, d] += x[i, d]
    return sums, counts


@njit(cache=True)
def scatter_add_rows(out, ids, vals):
    n, D = vals.shape
    for i in range(n):
        r = ids[i]
        for d in range(D):
            out[r, d] += vals[i, d]
    return out
