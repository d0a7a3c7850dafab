"""Numba-jitted kernels.

Same module-level surface as ``kernels_numpy``; inner loops are compiled
with ``@njit(cache=True)``.  Forward kernels replicate the per-output-element
accumulation order of the numpy fallback exactly (ascending channel, ky, kx;
one float rounding per step), so the two backends produce bit-identical
forward results.  Everything runs single-threaded: determinism never
depends on the host's core count.
"""

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def _pad_spatial(x, pad):
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    xp[:, :, pad : pad + h, pad : pad + w] = x
    return xp


@njit(cache=True)
def _conv2d_forward(x, w, b, use_bias, stride, pad):
    nn, cin, h, ww = x.shape
    cout = w.shape[0]
    k = w.shape[2]
    oh = (h + 2 * pad - k) // stride + 1
    ow = (ww + 2 * pad - k) // stride + 1
    xp = _pad_spatial(x, pad)
    out = np.empty((nn, cout, oh, ow), dtype=x.dtype)
    acc = np.empty(ow, dtype=x.dtype)
    for n in range(nn):
        for co in range(cout):
            for oy in range(oh):
                for j in range(ow):
                    acc[j] = 0.0
                for ci in range(cin):
                    for ky in range(k):
                        row = xp[n, ci, oy * stride + ky]
                        for kx in range(k):
                            wv = w[co, ci, ky, kx]
                            if stride == 1:
                                for j in range(ow):
                                    acc[j] += wv * row[j + kx]
                            else:
                                for j in range(ow):
                                    acc[j] += wv * row[j * stride + kx]
                if use_bias:
                    bv = b[co]
                    for j in range(ow):
                        out[n, co, oy, j] = acc[j] + bv
                else:
                    for j in range(ow):
                        out[n, co, oy, j] = acc[j]
    return out


def conv2d_forward(x, w, b, stride, pad):
    use_bias = b is not None
    if not use_bias:
        b = np.zeros(w.shape[0], dtype=x.dtype)
    return _conv2d_forward(x, w, b, use_bias, stride, pad)


@njit(cache=True)
def _conv2d_grad_input(go, w, stride, pad, in_h, in_w):
    nn, cout, oh, ow = go.shape
    cin = w.shape[1]
    k = w.shape[2]
    dxp = np.zeros((nn, cin, in_h + 2 * pad, in_w + 2 * pad), dtype=go.dtype)
    for co in range(cout):
        for ci in range(cin):
            for ky in range(k):
                for kx in range(k):
                    wv = w[co, ci, ky, kx]
                    for n in range(nn):
                        for oy in range(oh):
                            drow = dxp[n, ci, oy * stride + ky]
                            grow = go[n, co, oy]
                            if stride == 1:
                                for ox in range(ow):
                                    drow[kx + ox] += wv * grow[ox]
                            else:
                                for ox in range(ow):
                                    drow[kx + ox * stride] += wv * grow[ox]
    return dxp[:, :, pad : pad + in_h, pad : pad + in_w]


def conv2d_grad_input(go, w, stride, pad, in_h, in_w):
    return np.ascontiguousarray(_conv2d_grad_input(go, w, stride, pad, in_h, in_w))


@njit(cache=True)
def _conv2d_grad_weight(go, xp, k, stride):
    nn, cout, oh, ow = go.shape
    cin = xp.shape[1]
    dw = np.zeros((cout, cin, k, k), dtype=go.dtype)
    acc = np.empty(ow, dtype=go.dtype)
    for co in range(cout):
        for ci in range(cin):
            for ky in range(k):
                for kx in range(k):
                    for j in range(ow):
                        acc[j] = 0.0
                    for n in range(nn):
                        for oy in range(oh):
                            grow = go[n, co, oy]
                            xrow = xp[n, ci, oy * stride + ky]
                            if stride == 1:
                                for j in range(ow):
                                    acc[j] += grow[j] * xrow[j + kx]
                            else:
                                for j in range(ow):
                                    acc[j] += grow[j] * xrow[j * stride + kx]
                    s = go.dtype.type(0.0)
                    for j in range(ow):
                        s += acc[j]
                    dw[co, ci, ky, kx] = s
    return dw


def conv2d_grad_weight(go, x, k, stride, pad):
    xp = _pad_spatial(x, pad) if pad else x
    return _conv2d_grad_weight(go, xp, k, stride)


@njit(cache=True)
def _bilinear_forward(x, y0, y1, fy, x0, x1, fx):
    nn, c, ih, iw = x.shape
    oh = y0.shape[0]
    ow = x0.shape[0]
    out = np.empty((nn, c, oh, ow), dtype=x.dtype)
    one = x.dtype.type(1)
    for n in range(nn):
        for ci in range(c):
            plane = x[n, ci]
            for oy in range(oh):
                r0v = plane[y0[oy]]
                r1v = plane[y1[oy]]
                fyv = fy[oy]
                omfy = one - fyv
                for ox in range(ow):
                    fxv = fx[ox]
                    omfx = one - fxv
                    r0 = r0v[x0[ox]] * omfx + r0v[x1[ox]] * fxv
                    r1 = r1v[x0[ox]] * omfx + r1v[x1[ox]] * fxv
                    out[n, ci, oy, ox] = r0 * omfy + r1 * fyv
    return out


def bilinear_forward(x, y0, y1, fy, x0, x1, fx):
    return _bilinear_forward(x, y0, y1, fy, x0, x1, fx)


@njit(cache=True)
def _bilinear_grad_input(go, y0, y1, fy, x0, x1, fx, in_h, in_w):
    nn, c, oh, ow = go.shape
    dx = np.zeros((nn, c, in_h, in_w), dtype=go.dtype)
    one = go.dtype.type(1)
    for tap in range(4):
        for n in range(nn):
            for ci in range(c):
                for oy in range(oh):
                    fyv = fy[oy]
                    ty = y0[oy] if tap < 2 else y1[oy]
                    wy = (one - fyv) if tap < 2 else fyv
                    for ox in range(ow):
                        fxv = fx[ox]
                        tx = x0[ox] if tap % 2 == 0 else x1[ox]
                        wx = (one - fxv) if tap % 2 == 0 else fxv
                        dx[n, ci, ty, tx] += go[n, ci, oy, ox] * (wy * wx)
    return dx


def bilinear_grad_input(go, y0, y1, fy, x0, x1, fx, in_h, in_w):
    return _bilinear_grad_input(go, y0, y1, fy, x0, x1, fx, in_h, in_w)


@njit(cache=True)
def _window_avg_forward(x, k, stride, pad):
    nn, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    xp = _pad_spatial(x, pad)
    out = np.empty((nn, c, oh, ow), dtype=x.dtype)
    k2 = x.dtype.type(k * k)
    acc = np.empty(ow, dtype=x.dtype)
    for n in range(nn):
        for ci in range(c):
            for oy in range(oh):
                for j in range(ow):
                    acc[j] = 0.0
                for ky in range(k):
                    row = xp[n, ci, oy * stride + ky]
                    for kx in range(k):
                        if stride == 1:
                            for j in range(ow):
                                acc[j] += row[j + kx]
                        else:
                            for j in range(ow):
                                acc[j] += row[j * stride + kx]
                for j in range(ow):
                    out[n, ci, oy, j] = acc[j] / k2
    return out


def window_avg_forward(x, k, stride, pad):
    return _window_avg_forward(x, k, stride, pad)


@njit(cache=True)
def _window_avg_grad_input(go, k, stride, pad, in_h, in_w):
    nn, c, oh, ow = go.shape
    k2 = go.dtype.type(k * k)
    dxp = np.zeros((nn, c, in_h + 2 * pad, in_w + 2 * pad), dtype=go.dtype)
    for ky in range(k):
        for kx in range(k):
            for n in range(nn):
                for ci in range(c):
                    for oy in range(oh):
                        drow = dxp[n, ci, oy * stride + ky]
                        grow = go[n, ci, oy]
                        for ox in range(ow):
                            drow[kx + ox * stride] += grow[ox] / k2
    return dxp[:, :, pad : pad + in_h, pad : pad + in_w]


def window_avg_grad_input(go, k, stride, pad, in_h, in_w):
    return np.ascontiguousarray(_window_avg_grad_input(go, k, stride, pad, in_h, in_w))


@njit(cache=True)
def _fg_distance_and_error(fg_ys, fg_xs, fg_err, bg_ys, bg_xs, dist, nearest_err):
    for i in range(bg_ys.shape[0]):
        by = bg_ys[i]
        bx = bg_xs[i]
        best = np.int64(-1)
        best_err = 0.0
        for j in range(fg_ys.shape[0]):
            dy = by - fg_ys[j]
            dx = bx - fg_xs[j]
            d2 = dy * dy + dx * dx
            if best < 0 or d2 < best:
                best = d2
                best_err = fg_err[j]
            elif d2 == best and fg_err[j] < best_err:
                best_err = fg_err[j]
        dist[by, bx] = np.sqrt(np.float64(best))
        nearest_err[by, bx] = best_err


def fg_distance_and_error(fg, err):
    h, w = fg.shape
    ys, xs = np.nonzero(fg)
    dist = np.zeros((h, w), dtype=np.float64)
    nearest_err = err.astype(np.float64).copy()
    if ys.size == 0:
        return dist, nearest_err
    bg_ys, bg_xs = np.nonzero(~fg.astype(bool))
    if bg_ys.size == 0:
        return dist, nearest_err
    _fg_distance_and_error(
        ys.astype(np.int64),
        xs.astype(np.int64),
        err[ys, xs].astype(np.float64),
        bg_ys.astype(np.int64),
        bg_xs.astype(np.int64),
        dist,
        nearest_err,
    )
    return dist, nearest_err
