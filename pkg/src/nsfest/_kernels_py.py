"""Pure numpy implementations of the per-coordinate estimator kernels."""

import numpy as np


def dense_terms(u, v, sigma, cuts, coef, gamma):
    """Per-coordinate terms of the dense-zone estimator.

    ``cuts[l]`` is the upper edge sigma * t_l of block l and ``coef[l, k-1]``
    multiplies H_{2k}(u / sigma) in block l. Coordinates with |v| above the
    last edge get |u|**gamma.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    cuts = np.asarray(cuts, dtype=np.float64)
    coef = np.asarray(coef, dtype=np.float64)
    nblocks, kmax = coef.shape
    block = np.searchsorted(cuts, np.abs(v), side="left")
    out = np.empty_like(u)
    plug = block >= nblocks
    out[plug] = np.abs(u[plug]) ** gamma
    inner = ~plug
    if np.any(inner):
        z = u[inner] / sigma
        rows = coef[block[inner]]
        acc = np.zeros_like(z)
        h_prev, h = np.ones_like(z), z.copy()
        for j in range(1, 2 * kmax):
            h_prev, h = h, z * h - j * h_prev
            if j % 2 == 1:
                # h now holds H_{j+1}, an even degree 2k with k = (j + 1) / 2
                acc += rows[:, (j - 1) // 2] * h
        out[inner] = acc
    return out


def sparse_terms(y, eps, gamma, alpha, tau2):
    """(|y|**gamma - eps**gamma * alpha) on {y**2 > tau2}, zero elsewhere."""
    y = np.asarray(y, dtype=np.float64)
    keep = y * y > tau2
    out = np.zeros_like(y)
    out[keep] = np.abs(y[keep]) ** gamma - eps ** gamma * alpha
    return out
