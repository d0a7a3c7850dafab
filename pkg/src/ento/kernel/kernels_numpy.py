"""Pure-numpy kernels.

Fallback path for the jitted kernels in ``kernels_numba``.  Reduction order
matters: every output element accumulates its terms in ascending
(channel, ky, kx) index order, one rounding per addition, which makes the
forward results bit-identical to both the naive-loop oracle and the numba
backend.  Gradient kernels keep a fixed deterministic order but are only
required to agree with the other backend to floating-point tolerance.
"""

import numpy as np

NAME = "numpy"


def _pad_spatial(x, pad):
    if pad == 0:
        return x
    n, c, h, w = x.shape
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=x.dtype)
    xp[:, :, pad : pad + h, pad : pad + w] = x
    return xp


def conv2d_forward(x, w, b, stride, pad):
    n, cin, h, ww = x.shape
    cout, _, k, _ = w.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (ww + 2 * pad - k) // stride + 1
    xp = _pad_spatial(x, pad)
    out = np.zeros((n, cout, oh, ow), dtype=x.dtype)
    for ci in range(cin):
        for ky in range(k):
            for kx in range(k):
                sl = xp[:, ci, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride]
                out += w[None, :, ci, ky, kx, None, None] * sl[:, None, :, :]
    if b is not None:
        out += b[None, :, None, None]
    return out


def conv2d_grad_input(go, w, stride, pad, in_h, in_w):
    n, cout, oh, ow = go.shape
    _, cin, k, _ = w.shape
    dxp = np.zeros((n, cin, in_h + 2 * pad, in_w + 2 * pad), dtype=go.dtype)
    for co in range(cout):
        g = go[:, co]
        for ci in range(cin):
            for ky in range(k):
                for kx in range(k):
                    dxp[:, ci, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride] += (
                        w[co, ci, ky, kx] * g
                    )
    return dxp[:, :, pad : pad + in_h, pad : pad + in_w]


def conv2d_grad_weight(go, x, k, stride, pad):
    n, cout, oh, ow = go.shape
    cin = x.shape[1]
    xp = _pad_spatial(x, pad)
    dw = np.zeros((cout, cin, k, k), dtype=go.dtype)
    for ky in range(k):
        for kx in range(k):
            sl = xp[:, :, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride]
            dw[:, :, ky, kx] = np.tensordot(go, sl, axes=([0, 2, 3], [0, 2, 3]))
    return dw


def bilinear_forward(x, y0, y1, fy, x0, x1, fx):
    # fy/fx already cast to x.dtype; per-pixel lerp order: x-axis then y-axis
    rows0 = x[:, :, y0, :]
    rows1 = x[:, :, y1, :]
    v00 = rows0[:, :, :, x0]
    v01 = rows0[:, :, :, x1]
    v10 = rows1[:, :, :, x0]
    v11 = rows1[:, :, :, x1]
    fxb = fx[None, None, None, :]
    fyb = fy[None, None, :, None]
    r0 = v00 * (1 - fxb) + v01 * fxb
    r1 = v10 * (1 - fxb) + v11 * fxb
    return r0 * (1 - fyb) + r1 * fyb


def bilinear_grad_input(go, y0, y1, fy, x0, x1, fx, in_h, in_w):
    n, c, oh, ow = go.shape
    dx = np.zeros((n, c, in_h, in_w), dtype=go.dtype)
    fxb = fx[None, None, None, :]
    fyb = fy[None, None, :, None]
    yi0 = np.broadcast_to(y0[:, None], (oh, ow))
    yi1 = np.broadcast_to(y1[:, None], (oh, ow))
    xi0 = np.broadcast_to(x0[None, :], (oh, ow))
    xi1 = np.broadcast_to(x1[None, :], (oh, ow))
    for tap_y, tap_x, wgt in (
        (yi0, xi0, (1 - fyb) * (1 - fxb)),
        (yi0, xi1, (1 - fyb) * fxb),
        (yi1, xi0, fyb * (1 - fxb)),
        (yi1, xi1, fyb * fxb),
    ):
        contrib = go * wgt
        for ni in range(n):
            for ci in range(c):
                np.add.at(dx[ni, ci], (tap_y, tap_x), contrib[ni, ci])
    return dx


def window_avg_forward(x, k, stride, pad):
    n, c, h, w = x.shape
    oh = (h + 2 * pad - k) // stride + 1
    ow = (w + 2 * pad - k) // stride + 1
    xp = _pad_spatial(x, pad)
    out = np.zeros((n, c, oh, ow), dtype=x.dtype)
    for ky in range(k):
        for kx in range(k):
            out += xp[:, :, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride]
    out /= x.dtype.type(k * k)
    return out


def window_avg_grad_input(go, k, stride, pad, in_h, in_w):
    n, c, oh, ow = go.shape
    scaled = go / go.dtype.type(k * k)
    dxp = np.zeros((n, c, in_h + 2 * pad, in_w + 2 * pad), dtype=go.dtype)
    for ky in range(k):
        for kx in range(k):
            dxp[:, :, ky : ky + oh * stride : stride, kx : kx + ow * stride : stride] += scaled
    return dxp[:, :, pad : pad + in_h, pad : pad + in_w]


def fg_distance_and_error(fg, err):
    """Per-pixel distance to the nearest foreground pixel plus that pixel's
    error value.  Ties on distance take the smallest error among the
    equally-near foreground pixels (a mirror-symmetric rule).  Foreground
    pixels get distance 0 and their own error."""
    h, w = fg.shape
    ys, xs = np.nonzero(fg)
    dist = np.zeros((h, w), dtype=np.float64)
    nearest_err = err.astype(np.float64).copy()
    if ys.size == 0:
        return dist, nearest_err
    fg_err = err[ys, xs].astype(np.float64)
    bg_ys, bg_xs = np.nonzero(~fg.astype(bool))
    if bg_ys.size == 0:
        return dist, nearest_err
    dy = bg_ys[:, None].astype(np.int64) - ys[None, :].astype(np.int64)
    dx = bg_xs[:, None].astype(np.int64) - xs[None, :].astype(np.int64)
    d2 = dy * dy + dx * dx
    best = d2.min(axis=1)
    for i in range(bg_ys.size):
        at_min = d2[i] == best[i]
        nearest_err[bg_ys[i], bg_xs[i]] = fg_err[at_min].min()
    dist[bg_ys, bg_xs] = np.sqrt(best.astype(np.float64))
    return dist, nearest_err
