"""Compiled per-pixel kernels shared by the global, blocked and training paths.

Every public render path funnels through :func:`_select` and :func:`_blend`
so that the global and shell-restricted renderers are bit-identical whenever
they see the same candidate list in the same order.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _select(x, y, cand, mu, cs, sn, i1, i2, k, idx_out, w_out, q_out):
    # insertion into a descending list; equal densities keep the earlier index.
    # exp is monotone, so a candidate whose exponent is no smaller than the
    # current K-th one can never displace it and its exp is skipped.
    n = 0
    q_cut = np.inf
    for t in range(cand.shape[0]):
        i = cand[t]
        dx = x - mu[i, 0]
        dy = y - mu[i, 1]
        a = (cs[i] * dx + sn[i] * dy) * i1[i]
        b = (cs[i] * dy - sn[i] * dx) * i2[i]
        q = a * a + b * b
        if q >= q_cut:
            continue
        # exp underflows to exactly 0 here; libm's slow path is skipped
        d = math.exp(-0.5 * q) if q < 1492.0 else 0.0
        if n == k:
            if d <= w_out[k - 1]:
                continue
            j = k - 1
        else:
            j = n
            n += 1
        while j > 0 and w_out[j - 1] < d:
            w_out[j] = w_out[j - 1]
            q_out[j] = q_out[j - 1]
            idx_out[j] = idx_out[j - 1]
            j -= 1
        w_out[j] = d
        q_out[j] = q
        idx_out[j] = i
        if n == k:
            q_cut = q_out[k - 1]
    return n


@njit(cache=True)
def _blend(n, idx, w, colors, eps, out):
    total = 0.0
    r = 0.0
    g = 0.0
    b = 0.0
    for j in range(n):
        wj = w[j]
        i = idx[j]
        total += wj
        r += wj * colors[i, 0]
        g += wj * colors[i, 1]
        b += wj * colors[i, 2]
    denom = eps + total
    out[0] = r / denom
    out[1] = g / denom
    out[2] = b / denom
    return denom


@njit(cache=True)
def render_points(xs, ys, mu, cs, sn, i1, i2, colors, k, eps):
    n_px = xs.shape[0]
    n_g = mu.shape[0]
    cand = np.arange(n_g)
    out = np.empty((n_px, 3))
    idx = np.empty(k, dtype=np.int64)
    w = np.empty(k)
    qb = np.empty(k)
    for p in range(n_px):
        n = _select(xs[p], ys[p], cand, mu, cs, sn, i1, i2, k, idx, w, qb)
        _blend(n, idx, w, colors, eps, out[p])
    return out


@njit(cache=True)
def locate_points(xs, ys, node_axis, node_cut, node_left, node_right, node_leaf):
    out = np.empty(xs.shape[0], dtype=np.int64)
    for p in range(xs.shape[0]):
        node = 0
        while node_axis[node] >= 0:
            coord = xs[p] if node_axis[node] == 0 else ys[p]
            if coord < node_cut[node]:
                node = node_left[node]
            else:
                node = node_right[node]
        out[p] = node_leaf[node]
    return out


@njit(cache=True)
def render_points_blocked(xs, ys, node_axis, node_cut, node_left, node_right, node_leaf,
                          shell_offsets, shell_members, mu, cs, sn, i1, i2, colors, k, eps):
    n_px = xs.shape[0]
    out = np.empty((n_px, 3))
    idx = np.empty(k, dtype=np.int64)
    w = np.empty(k)
    qb = np.empty(k)
    for p in range(n_px):
        node = 0
        while node_axis[node] >= 0:
            coord = xs[p] if node_axis[node] == 0 else ys[p]
            if coord < node_cut[node]:
                node = node_left[node]
            else:
                node = node_right[node]
        blk = node_leaf[node]
        lo = shell_offsets[blk]
        hi = shell_offsets[blk + 1]
        if hi == lo:
            out[p, 0] = 0.0
            out[p, 1] = 0.0
            out[p, 2] = 0.0
            continue
        n = _select(xs[p], ys[p], shell_members[lo:hi], mu, cs, sn, i1, i2, k, idx, w, qb)
        _blend(n, idx, w, colors, eps, out[p])
    return out


@njit(cache=True)
def select_points(xs, ys, mu, cs, sn, i1, i2, k):
    n_px = xs.shape[0]
    n_g = mu.shape[0]
    cand = np.arange(n_g)
    kk = min(k, n_g)
    idx = np.empty((n_px, kk), dtype=np.int64)
    w = np.empty((n_px, kk))
    ib = np.empty(k, dtype=np.int64)
    wb = np.empty(k)
    qb = np.empty(k)
    for p in range(n_px):
        n = _select(xs[p], ys[p], cand, mu, cs, sn, i1, i2, k, ib, wb, qb)
        for j in range(n):
            idx[p, j] = ib[j]
            w[p, j] = wb[j]
    return idx, w


@njit(cache=True)
def _accumulate(x, y, n, idx, w, denom, cr, up, mu, cs, sn, i1, i2, colors,
                g_mu, g_theta, g_scale, g_color):
    for j in range(n):
        i = idx[j]
        wj = w[j]
        # colour path: d c_r / d c_j = w_j / denom
        f = wj / denom
        g_color[i, 0] += up[0] * f
        g_color[i, 1] += up[1] * f
        g_color[i, 2] += up[2] * f
        # weight path: d c_r / d w_j = (c_j - c_r) / denom
        dlw = (up[0] * (colors[i, 0] - cr[0])
               + up[1] * (colors[i, 1] - cr[1])
               + up[2] * (colors[i, 2] - cr[2])) / denom
        if dlw == 0.0 or wj == 0.0:
            continue
        dx = x - mu[i, 0]
        dy = y - mu[i, 1]
        c = cs[i]
        s = sn[i]
        p1 = c * dx + s * dy
        p2 = c * dy - s * dx
        q1 = i1[i] * i1[i]
        q2 = i2[i] * i2[i]
        a1 = p1 * q1
        a2 = p2 * q2
        gw = dlw * wj
        g_mu[i, 0] += gw * (c * a1 - s * a2)
        g_mu[i, 1] += gw * (s * a1 + c * a2)
        g_theta[i] += -gw * p1 * p2 * (q1 - q2)
        g_scale[i, 0] += gw * p1 * a1 * i1[i]
        g_scale[i, 1] += gw * p2 * a2 * i2[i]


@njit(cache=True)
def backward_points(xs, ys, upstream, mu, cs, sn, i1, i2, colors, k, eps,
                    g_mu, g_theta, g_scale, g_color):
    n_g = mu.shape[0]
    cand = np.arange(n_g)
    idx = np.empty(k, dtype=np.int64)
    w = np.empty(k)
    qb = np.empty(k)
    cr = np.empty(3)
    for p in range(xs.shape[0]):
        n = _select(xs[p], ys[p], cand, mu, cs, sn, i1, i2, k, idx, w, qb)
        denom = _blend(n, idx, w, colors, eps, cr)
        _accumulate(xs[p], ys[p], n, idx, w, denom, cr, upstream[p], mu, cs, sn, i1, i2,
                    colors, g_mu, g_theta, g_scale, g_color)


@njit(cache=True)
def l1_step(xs, ys, targets, mu, cs, sn, i1, i2, colors, k, eps,
            g_mu, g_theta, g_scale, g_color):
    """Fused forward + backward of the mean per-sample L1 loss; returns the loss."""
    n_px = xs.shape[0]
    n_g = mu.shape[0]
    cand = np.arange(n_g)
    idx = np.empty(k, dtype=np.int64)
    w = np.empty(k)
    qb = np.empty(k)
    cr = np.empty(3)
    up = np.empty(3)
    inv_n = 1.0 / n_px
    loss = 0.0
    for p in range(n_px):
        n = _select(xs[p], ys[p], cand, mu, cs, sn, i1, i2, k, idx, w, qb)
        denom = _blend(n, idx, w, colors, eps, cr)
        for ch in range(3):
            r = cr[ch] - targets[p, ch]
            loss += abs(r)
            if r > 0.0:
                up[ch] = inv_n
            elif r < 0.0:
                up[ch] = -inv_n
            else:
                up[ch] = 0.0
        _accumulate(xs[p], ys[p], n, idx, w, denom, cr, up, mu, cs, sn, i1, i2,
                    colors, g_mu, g_theta, g_scale, g_color)
    return loss * inv_n
