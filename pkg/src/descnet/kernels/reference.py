"""Pure-numpy kernel implementations.

Semantics are the contract; ``jit`` mirrors them loop-for-loop. Window
positions that would overlap padding (start index t with t + win >
valid_len) are excluded before pooling, so a padded tail can never
influence the pooled value. A map whose best pre-activation is <= 0, or
that has no valid position at all, pools to 0 and reports argmax -1.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_pool_forward(x, w, b, valid_len):
    """1-D convolution + ReLU + masked max-over-time pooling.

    x: (B, L, D), w: (win, D, F), b: (F,), valid_len: (B,) ints.
    Returns (pooled (B, F), argmax (B, F) with -1 where nothing pooled).
    """
    B, L, D = x.shape
    win, _, F = w.shape
    T = L - win + 1
    if T <= 0:
        return (
            np.zeros((B, F), dtype=x.dtype),
            np.full((B, F), -1, dtype=np.int64),
        )
    # windows: (B, T, D, win); contract (win, D) against w -> (B, T, F)
    windows = sliding_window_view(x, win, axis=1)
    z = np.tensordot(windows, w, axes=([3, 2], [0, 1])) + b
    n_valid = np.asarray(valid_len, dtype=np.int64) - win + 1
    invalid = np.arange(T)[None, :] >= n_valid[:, None]
    z = np.where(invalid[:, :, None], -np.inf, z)
    best = z.max(axis=1)
    arg = z.argmax(axis=1)
    active = best > 0.0
    pooled = np.where(active, best, 0.0).astype(x.dtype, copy=False)
    argmax = np.where(active, arg, -1).astype(np.int64, copy=False)
    return pooled, argmax


def conv_pool_backward(x, w, g_pooled, argmax):
    """Backward pass of conv_pool_forward.

    Routes each map's pooled gradient to its argmax window. Returns
    (g_x, g_w, g_b) with the shapes of (x, w, b).
    """
    B, L, D = x.shape
    win, _, F = w.shape
    g_x = np.zeros_like(x)
    g_w = np.zeros_like(w)
    g_b = np.zeros(F, dtype=x.dtype)
    active = argmax >= 0
    offsets = np.arange(win)
    for f in range(F):
        sel = active[:, f]
        if not sel.any():
            continue
        bi = np.nonzero(sel)[0]
        t = argmax[bi, f]
        g = g_pooled[bi, f]
        g_b[f] = g.sum()
        idx = t[:, None] + offsets[None, :]
        patches = x[bi[:, None], idx]  # (n, win, D)
        g_w[:, :, f] = np.einsum("n,nwd->wd", g, patches)
        contrib = g[:, None, None] * w[None, :, :, f]
        np.add.at(g_x, (bi[:, None], idx), contrib)
    return g_x, g_w, g_b


def kmeans_assign(x, centroids):
    """Nearest-centroid assignment; ties break to the lowest cluster id.

    Returns (labels (N,) int64, squared distances (N,)).
    """
    x2 = np.einsum("nd,nd->n", x, x)
    c2 = np.einsum("kd,kd->k", centroids, centroids)
    d2 = x2[:, None] - 2.0 * (x @ centroids.T) + c2[None, :]
    np.maximum(d2, 0.0, out=d2)
    labels = d2.argmin(axis=1).astype(np.int64)
    dists = d2[np.arange(x.shape[0]), labels]
    return labels, dists


def kmeans_update(x, labels, k):
    """Per-cluster sums and counts, accumulated in point order."""
    sums = np.zeros((k, x.shape[1]), dtype=x.dtype)
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return sums, counts


def scatter_add_rows(out, ids, vals):
    """out[ids[i]] += vals[i] for every row i (duplicate ids accumulate)."""
    np.add.at(out, ids, vals)
    return out
