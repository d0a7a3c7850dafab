"""Kernel operations: the exact op set the attention blocks and losses need.

Each op validates shapes, runs the selected backend kernel (or shared numpy
code for the cheap pointwise/reduce ops), and, when a tape is active and an
input participates in differentiation, records a backward closure.

Determinism contract: per-output-element accumulation order is fixed, all
kernels are single-threaded, and repeated runs produce bit-identical
results.  conv2d and window_avg additionally match a naive nested-loop
oracle bit-exactly because they accumulate in ascending (channel, ky, kx)
order with one rounding per step.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import backend
from .tensor import Tensor, active_tape

_K = backend.load_kernels()


def kernel_backend():
    """Name of the kernel backend currently in use."""
    return _K.NAME


def set_backend(name):
    """Switch kernel backend at runtime (used by tests and benchmarks)."""
    global _K
    _K = backend.load_kernels(name)


def _check_tensor(t, what):
    if not isinstance(t, Tensor):
        raise ShapeError(f"{what} must be a Tensor, got {type(t).__name__}")


def _check_same_dtype(what, *tensors):
    dtypes = {t.dtype for t in tensors if t is not None}
    if len(dtypes) > 1:
        raise ShapeError(f"{what}: mixed dtypes {sorted(str(d) for d in dtypes)}")


def _record(out, inputs, backfn):
    tape = active_tape()
    if tape is not None and any(tape.needs_grad(t) for t in inputs if t is not None):
        tape.record(out, inputs, backfn)
    return out


def _needs(t):
    tape = active_tape()
    return tape is not None and tape.needs_grad(t)


# ---------------------------------------------------------------------------
# convolution

@dataclass(frozen=True)
class ConvSpec:
    """2-D cross-correlation with zero padding k//2 ("same" at stride 1)."""

    kernel_size: int
    in_channels: int
    out_channels: int
    stride: int = 1
    has_bias: bool = True

    def __post_init__(self):
        if self.kernel_size not in (1, 3, 7):
            raise ShapeError(f"kernel_size must be 1, 3 or 7, got {self.kernel_size}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ShapeError("conv channel counts must be positive")
        if self.stride not in (1, 2):
            raise ShapeError(f"stride must be 1 or 2, got {self.stride}")

    @property
    def padding(self):
        return self.kernel_size // 2

    @property
    def weight_shape(self):
        return (self.out_channels, self.in_channels, self.kernel_size, self.kernel_size)


def conv2d(x, spec, weight, bias=None):
    _check_tensor(x, "conv2d input")
    _check_tensor(weight, "conv2d weight")
    _check_same_dtype("conv2d", x, weight, bias)
    n, c, h, w = x.shape
    if c != spec.in_channels:
        raise ShapeError(
            f"conv2d: input has {c} channels but spec.in_channels={spec.in_channels}"
        )
    if h < 1 or w < 1:
        raise ShapeError(f"conv2d: zero-sized spatial dims in input shape {x.shape}")
    if tuple(weight.shape) != spec.weight_shape:
        raise ShapeError(
            f"conv2d: weight shape {tuple(weight.shape)} does not match spec {spec.weight_shape}"
        )
    if spec.has_bias:
        if bias is None or tuple(bias.shape) != (1, spec.out_channels, 1, 1):
            got = None if bias is None else tuple(bias.shape)
            raise ShapeError(
                f"conv2d: bias shape must be (1,{spec.out_channels},1,1), got {got}"
            )
    elif bias is not None:
        raise ShapeError("conv2d: bias given but spec.has_bias is false")

    b_flat = bias.data.reshape(spec.out_channels) if bias is not None else None
    out = Tensor(_K.conv2d_forward(x.data, weight.data, b_flat, spec.stride, spec.padding))

    need_x, need_w = _needs(x), _needs(weight)
    need_b = bias is not None and _needs(bias)
    if need_x or need_w or need_b:
        xd, wd = x.data, weight.data

        def backfn(go):
            gx = gw = gb = None
            if need_x:
                gx = _K.conv2d_grad_input(go, wd, spec.stride, spec.padding, h, w)
            if need_w:
                gw = _K.conv2d_grad_weight(go, xd, spec.kernel_size, spec.stride, spec.padding)
            if need_b:
                gb = np.sum(go, axis=(0, 2, 3)).reshape(1, spec.out_channels, 1, 1)
            return gx, gw, gb

        _record(out, (x, weight, bias), backfn)
    return out


# ---------------------------------------------------------------------------
# resampling

def _resize_coords(in_size, out_size, dtype):
    # half-pixel centers: src = (dst + 0.5) * in/out - 0.5, clamped
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    i0 = np.floor(src).astype(np.int64)
    i0 = np.minimum(i0, in_size - 1)
    i1 = np.minimum(i0 + 1, in_size - 1)
    frac = (src - i0).astype(dtype)
    return i0, i1, frac


def bilinear_resize(x, out_h, out_w):
    _check_tensor(x, "bilinear_resize input")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"bilinear_resize: target size must be >= 1, got {out_h}x{out_w}")
    n, c, h, w = x.shape
    y0, y1, fy = _resize_coords(h, out_h, x.dtype)
    x0, x1, fx = _resize_coords(w, out_w, x.dtype)
    out = Tensor(_K.bilinear_forward(x.data, y0, y1, fy, x0, x1, fx))

    if _needs(x):

        def backfn(go):
            return (_K.bilinear_grad_input(go, y0, y1, fy, x0, x1, fx, h, w),)

        _record(out, (x,), backfn)
    return out


# ---------------------------------------------------------------------------
# pooling

def global_avg(x):
    _check_tensor(x, "global_avg input")
    n, c, h, w = x.shape
    inv = x.dtype.type(1.0 / (h * w))
    out = Tensor(np.sum(x.data, axis=(2, 3), keepdims=True) * inv)

    if _needs(x):

        def backfn(go):
            return (np.broadcast_to(go * inv, x.shape).copy(),)

        _record(out, (x,), backfn)
    return out


def channel_avg_max(x):
    _check_tensor(x, "channel_avg_max input")
    n, c, h, w = x.shape
    avg = np.zeros((n, h, w), dtype=x.dtype)
    for ci in range(c):
        avg += x.data[:, ci]
    avg /= x.dtype.type(c)
    mx = np.max(x.data, axis=1)
    out = Tensor(np.stack([avg, mx], axis=1))

    if _needs(x):
        amax = np.argmax(x.data, axis=1)  # first occurrence on ties

        def backfn(go):
            gx = np.empty_like(x.data)
            gx[...] = go[:, 0:1] / x.dtype.type(c)
            sel = np.arange(c).reshape(1, c, 1, 1) == amax[:, None]
            gx += go[:, 1:2] * sel
            return (gx,)

        _record(out, (x,), backfn)
    return out


def window_avg(x, k, stride=1, pad=None):
    _check_tensor(x, "window_avg input")
    if k < 1 or k % 2 == 0:
        raise ShapeError(f"window_avg: k must be odd and positive, got {k}")
    if stride < 1:
        raise ShapeError(f"window_avg: stride must be >= 1, got {stride}")
    if pad is None:
        pad = k // 2
    if pad < 0 or pad > k // 2:
        raise ShapeError(f"window_avg: pad must be in [0, {k // 2}], got {pad}")
    n, c, h, w = x.shape
    if h + 2 * pad < k or w + 2 * pad < k:
        raise ShapeError(f"window_avg: window {k} exceeds padded input {h}x{w}+2*{pad}")
    out = Tensor(_K.window_avg_forward(x.data, k, stride, pad))

    if _needs(x):

        def backfn(go):
            return (_K.window_avg_grad_input(go, k, stride, pad, h, w),)

        _record(out, (x,), backfn)
    return out


# ---------------------------------------------------------------------------
# pointwise

def relu(x):
    _check_tensor(x, "relu input")
    out = Tensor(np.maximum(x.data, 0))

    if _needs(x):
        mask = x.data > 0

        def backfn(go):
            return (go * mask,)

        _record(out, (x,), backfn)
    return out


def prelu(x, slopes):
    _check_tensor(x, "prelu input")
    _check_tensor(slopes, "prelu slopes")
    _check_same_dtype("prelu", x, slopes)
    n, c, h, w = x.shape
    if tuple(slopes.shape) != (1, c, 1, 1):
        raise ShapeError(
            f"prelu: slopes shape must be (1,{c},1,1), got {tuple(slopes.shape)}"
        )
    pos = x.data > 0
    out = Tensor(np.where(pos, x.data, slopes.data * x.data))

    need_x, need_a = _needs(x), _needs(slopes)
    if need_x or need_a:
        xd, ad = x.data, slopes.data

        def backfn(go):
            gx = ga = None
            if need_x:
                gx = go * np.where(pos, x.dtype.type(1), ad)
            if need_a:
                ga = np.sum(go * np.where(pos, x.dtype.type(0), xd), axis=(0, 2, 3), keepdims=True)
            return gx, ga

        _record(out, (x, slopes), backfn)
    return out


def sigmoid(x):
    _check_tensor(x, "sigmoid input")
    z = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1 / (1 + z), z / (1 + z))
    out = Tensor(y.astype(x.dtype, copy=False))

    if _needs(x):
        yd = out.data

        def backfn(go):
            return (go * yd * (1 - yd),)

        _record(out, (x,), backfn)
    return out


def add(x, y):
    _check_tensor(x, "add lhs")
    _check_tensor(y, "add rhs")
    _check_same_dtype("add", x, y)
    if x.shape != y.shape:
        raise ShapeError(f"add: shape mismatch {x.shape} vs {y.shape}")
    out = Tensor(x.data + y.data)

    need_x, need_y = _needs(x), _needs(y)
    if need_x or need_y:

        def backfn(go):
            return (go if need_x else None, go if need_y else None)

        _record(out, (x, y), backfn)
    return out


def hadamard(x, y):
    _check_tensor(x, "hadamard lhs")
    _check_tensor(y, "hadamard rhs")
    _check_same_dtype("hadamard", x, y)
    if x.shape != y.shape:
        raise ShapeError(f"hadamard: shape mismatch {x.shape} vs {y.shape}")
    out = Tensor(x.data * y.data)

    need_x, need_y = _needs(x), _needs(y)
    if need_x or need_y:
        xd, yd = x.data, y.data

        def backfn(go):
            return (go * yd if need_x else None, go * xd if need_y else None)

        _record(out, (x, y), backfn)
    return out


def channel_scale(x, weights):
    _check_tensor(x, "channel_scale input")
    _check_tensor(weights, "channel_scale weights")
    _check_same_dtype("channel_scale", x, weights)
    n, c, h, w = x.shape
    if tuple(weights.shape) != (n, c, 1, 1):
        raise ShapeError(
            f"channel_scale: weights shape must be ({n},{c},1,1), got {tuple(weights.shape)}"
        )
    out = Tensor(x.data * weights.data)

    need_x, need_w = _needs(x), _needs(weights)
    if need_x or need_w:
        xd, wd = x.data, weights.data

        def backfn(go):
            gx = go * wd if need_x else None
            gw = np.sum(go * xd, axis=(2, 3), keepdims=True) if need_w else None
            return gx, gw

        _record(out, (x, weights), backfn)
    return out


def spatial_scale(x, weights):
    _check_tensor(x, "spatial_scale input")
    _check_tensor(weights, "spatial_scale weights")
    _check_same_dtype("spatial_scale", x, weights)
    n, c, h, w = x.shape
    if tuple(weights.shape) != (n, 1, h, w):
        raise ShapeError(
            f"spatial_scale: weights shape must be ({n},1,{h},{w}), got {tuple(weights.shape)}"
        )
    out = Tensor(x.data * weights.data)

    need_x, need_w = _needs(x), _needs(weights)
    if need_x or need_w:
        xd, wd = x.data, weights.data

        def backfn(go):
            gx = go * wd if need_x else None
            gw = np.sum(go * xd, axis=1, keepdims=True) if need_w else None
            return gx, gw

        _record(out, (x, weights), backfn)
    return out


def scale(x, c):
    _check_tensor(x, "scale input")
    cv = x.dtype.type(c)
    out = Tensor(x.data * cv)

    if _needs(x):

        def backfn(go):
            return (go * cv,)

        _record(out, (x,), backfn)
    return out


def offset(x, c):
    _check_tensor(x, "offset input")
    out = Tensor(x.data + x.dtype.type(c))

    if _needs(x):

        def backfn(go):
            return (go,)

        _record(out, (x,), backfn)
    return out


def divide(x, y):
    _check_tensor(x, "divide numerator")
    _check_tensor(y, "divide denominator")
    _check_same_dtype("divide", x, y)
    if x.shape != y.shape:
        raise ShapeError(f"divide: shape mismatch {x.shape} vs {y.shape}")
    out = Tensor(x.data / y.data)

    need_x, need_y = _needs(x), _needs(y)
    if need_x or need_y:
        yd, od = y.data, out.data

        def backfn(go):
            gx = go / yd if need_x else None
            gy = -go * od / yd if need_y else None
            return gx, gy

        _record(out, (x, y), backfn)
    return out


def bce_with_logits(logits, targets):
    """Elementwise binary cross entropy on logits, log-sum-exp stable form."""
    _check_tensor(logits, "bce logits")
    _check_tensor(targets, "bce targets")
    _check_same_dtype("bce_with_logits", logits, targets)
    if logits.shape != targets.shape:
        raise ShapeError(f"bce_with_logits: shape mismatch {logits.shape} vs {targets.shape}")
    xd, td = logits.data, targets.data
    val = np.maximum(xd, 0) - xd * td + np.log1p(np.exp(-np.abs(xd)))
    out = Tensor(val.astype(logits.dtype, copy=False))

    if _needs(logits):

        def backfn(go):
            z = np.exp(-np.abs(xd))
            sig = np.where(xd >= 0, 1 / (1 + z), z / (1 + z))
            return (go * (sig - td), None)

        _record(out, (logits, targets), backfn)
    return out


# ---------------------------------------------------------------------------
# concat / slice / reductions

def concat_channels(parts):
    if not parts:
        raise ShapeError("concat_channels: empty part list")
    for i, p in enumerate(parts):
        _check_tensor(p, f"concat_channels part {i}")
    _check_same_dtype("concat_channels", *parts)
    n, _, h, w = parts[0].shape
    for i, p in enumerate(parts):
        pn, _, ph, pw = p.shape
        if (pn, ph, pw) != (n, h, w):
            raise ShapeError(
                f"concat_channels: part {i} has N/H/W {(pn, ph, pw)}, expected {(n, h, w)}"
            )
    out = Tensor(np.concatenate([p.data for p in parts], axis=1))

    tracked = [_needs(p) for p in parts]
    if any(tracked):
        widths = [p.shape[1] for p in parts]
        offs = np.cumsum([0] + widths)

        def backfn(go):
            return tuple(
                np.ascontiguousarray(go[:, offs[i] : offs[i + 1]]) if tracked[i] else None
                for i in range(len(parts))
            )

        _record(out, tuple(parts), backfn)
    return out


def slice_channels(x, start, stop):
    _check_tensor(x, "slice_channels input")
    n, c, h, w = x.shape
    if not (0 <= start < stop <= c):
        raise ShapeError(f"slice_channels: invalid range [{start},{stop}) for {c} channels")
    out = Tensor(np.ascontiguousarray(x.data[:, start:stop]))

    if _needs(x):

        def backfn(go):
            gx = np.zeros_like(x.data)
            gx[:, start:stop] = go
            return (gx,)

        _record(out, (x,), backfn)
    return out


def sum_all(x):
    _check_tensor(x, "sum_all input")
    out = Tensor(np.sum(x.data).reshape(1, 1, 1, 1).astype(x.dtype))

    if _needs(x):

        def backfn(go):
            return (np.broadcast_to(go, x.shape).copy(),)

        _record(out, (x,), backfn)
    return out


def sum_per_image(x):
    _check_tensor(x, "sum_per_image input")
    out = Tensor(np.sum(x.data, axis=(1, 2, 3), keepdims=True).astype(x.dtype))

    if _needs(x):

        def backfn(go):
            return (np.broadcast_to(go, x.shape).copy(),)

        _record(out, (x,), backfn)
    return out
