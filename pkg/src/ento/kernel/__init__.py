"""Minimal deterministic tensor kernel with reverse-mode gradients."""

from .tensor import (
    Tensor,
    GradTape,
    ParamStore,
    Parameter,
    active_tape,
    backward,
    scalar,
    tensor,
    zeros,
)
from .ops import (
    ConvSpec,
    add,
    bce_with_logits,
    bilinear_resize,
    channel_avg_max,
    channel_scale,
    concat_channels,
    conv2d,
    divide,
    global_avg,
    hadamard,
    kernel_backend,
    offset,
    prelu,
    relu,
    scale,
    set_backend,
    sigmoid,
    slice_channels,
    spatial_scale,
    sum_all,
    sum_per_image,
    window_avg,
)
from .gradcheck import grad_check

__all__ = [
    "Tensor", "GradTape", "ParamStore", "Parameter", "active_tape", "backward",
    "scalar", "tensor", "zeros", "ConvSpec", "add", "bce_with_logits",
    "bilinear_resize", "channel_avg_max", "channel_scale", "concat_channels",
    "conv2d", "divide", "global_avg", "hadamard", "kernel_backend", "offset",
    "prelu", "relu", "scale", "set_backend", "sigmoid", "slice_channels",
    "spatial_scale", "sum_all", "sum_per_image", "window_avg", "grad_check",
]
