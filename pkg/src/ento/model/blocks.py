"""Attention building blocks.

Layers register their parameters into a shared ParamStore under
hierarchical names; calling a block runs kernel ops (recorded on the
active tape).  Every block is a residual refinement: with all of its
convolutions zero-filled it reduces to passing the skip input through
unchanged.
"""

import math

from .. import kernel as K
from ..errors import ShapeError

CAB_REDUCTION = 16


class Conv:
    """Convolution layer: fan-in-scaled uniform init, optional zero-init bias
    for logit-producing heads."""

    def __init__(self, store, name, in_ch, out_ch, k, stride=1, bias=True, head=False):
        self.spec = K.ConvSpec(k, in_ch, out_ch, stride=stride, has_bias=bias)
        bound = 1.0 / math.sqrt(in_ch * k * k)
        self.weight = store.register(
            f"{name}.weight", self.spec.weight_shape, ("uniform", bound), "conv_weight"
        )
        self.bias = None
        if bias:
            init = "zeros" if head else ("uniform", bound)
            self.bias = store.register(f"{name}.bias", (1, out_ch, 1, 1), init, "conv_bias")

    def __call__(self, x):
        return K.conv2d(x, self.spec, self.weight.tensor, self.bias.tensor if self.bias else None)


class PReLU:
    def __init__(self, store, name, channels, init_slope=0.25):
        self.slopes = store.register(
            f"{name}.slope", (1, channels, 1, 1), ("constant", init_slope), "prelu_slope"
        )

    def __call__(self, x):
        return K.prelu(x, self.slopes.tensor)


class ChannelAttentionBlock:
    """Residual refinement gated by per-channel sigmoid weights derived from
    globally pooled statistics (squeeze/excite bottleneck ratio 16)."""

    def __init__(self, store, name, channels):
        mid = max(channels // CAB_REDUCTION, 1)
        self.conv_a = Conv(store, f"{name}.conv_a", channels, channels, 3)
        self.act = PReLU(store, f"{name}.act", channels)
        self.conv_b = Conv(store, f"{name}.conv_b", channels, channels, 3)
        self.squeeze = Conv(store, f"{name}.squeeze", channels, mid, 1)
        self.excite = Conv(store, f"{name}.excite", mid, channels, 1)

    def __call__(self, feat, cross, return_attention=False):
        """feat and cross share [N,C,h,w]; cross is the already-resized
        coarser-level feature (zero tensor when absent)."""
        base = K.add(feat, cross)
        mixed = self.conv_b(self.act(self.conv_a(base)))
        gates = K.sigmoid(self.excite(K.relu(self.squeeze(K.global_avg(mixed)))))
        out = K.add(K.channel_scale(mixed, gates), base)
        if return_attention:
            return out, gates
        return out


class SpatialAttentionBlock:
    """Residual map refinement gated by a per-pixel sigmoid map derived from
    channel-pooled statistics (7x7 mixing conv)."""

    def __init__(self, store, name, channels):
        self.conv_a = Conv(store, f"{name}.conv_a", channels, channels, 3)
        self.act_a = PReLU(store, f"{name}.act_a", channels)
        self.conv_b = Conv(store, f"{name}.conv_b", channels, channels, 3)
        self.gate = Conv(store, f"{name}.gate", 2, 1, 7)
        self.conv_c = Conv(store, f"{name}.conv_c", channels, channels, 3)
        self.act_c = PReLU(store, f"{name}.act_c", channels)
        self.conv_d = Conv(store, f"{name}.conv_d", channels, 1, 3, head=True)

    def __call__(self, feat, prev_map, return_attention=False):
        """prev_map [N,1,h,w] already at feat's spatial size; returns the
        refined map logits."""
        mixed = self.conv_b(self.act_a(self.conv_a(feat)))
        gates = K.sigmoid(self.gate(K.channel_avg_max(mixed)))
        delta = self.conv_d(self.act_c(self.conv_c(K.spatial_scale(mixed, gates))))
        out = K.add(delta, prev_map)
        if return_attention:
            return out, gates
        return out


class GroupAttention:
    """One group-guidance op: interleave the guidance map among ``groups``
    channel groups, then residually refine feature and guidance."""

    def __init__(self, store, name, channels, groups):
        if channels % groups != 0:
            raise ShapeError(f"channels {channels} not divisible by group count {groups}")
        self.channels = channels
        self.groups = groups
        self.feat_conv = Conv(store, f"{name}.feat", channels + groups, channels, 3)
        self.guide_conv = Conv(store, f"{name}.guide", channels, 1, 3, head=True)

    def interleave(self, feat, guide):
        gs = self.channels // self.groups
        parts = []
        for j in range(self.groups):
            parts.append(K.slice_channels(feat, j * gs, (j + 1) * gs))
            parts.append(guide)
        return K.concat_channels(parts)

    def __call__(self, feat, guide):
        mixed = self.interleave(feat, guide)
        feat_out = K.add(feat, K.relu(self.feat_conv(mixed)))
        guide_out = K.add(guide, self.guide_conv(feat_out))
        return feat_out, guide_out


class GroupAttentionStage:
    """A stage of chained group-attention ops with doubling group counts."""

    def __init__(self, store, name, channels, group_sizes):
        self.ops = [
            GroupAttention(store, f"{name}.ga{i + 1}", channels, s)
            for i, s in enumerate(group_sizes)
        ]

    def __call__(self, feat, guide):
        for op in self.ops:
            feat, guide = op(feat, guide)
        return feat, guide
