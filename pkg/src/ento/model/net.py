"""The segmentation network: toy encoder, channel equalization, and the
three consecutive decode stages (enrich / base / retouch).

Level convention: level i (1-based) holds features of spatial size
H/2^(i+1) x W/2^(i+1); python lists are indexed [level-1].  All produced
segmentation maps are logits; sigmoid is applied only by losses, metrics,
and export.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import kernel as K
from ..errors import ShapeError
from .blocks import ChannelAttentionBlock, Conv, GroupAttentionStage, SpatialAttentionBlock
from .config import GA_OPS_PER_STAGE, GROUP_SIZES, EntoConfig

ENCODER_STEM_CHANNELS = 16


def encoder_stage_channels(levels):
    """Channel widths of the raw encoder pyramid: 16, 32, 64, ..."""
    return [ENCODER_STEM_CHANNELS * (2 ** i) for i in range(levels)]


@dataclass
class PredictionSet:
    """The supervised outputs: coarse map, per-level base maps, per-level
    retouch maps (absent in the base-only variant).  All logits."""

    coarse: K.Tensor
    base_levels: list = field(default_factory=list)
    retouch_levels: list = field(default_factory=list)

    @property
    def base(self):
        return self.base_levels[0]

    @property
    def retouch(self):
        return self.retouch_levels[0] if self.retouch_levels else None

    @property
    def final(self):
        return self.retouch if self.retouch is not None else self.base

    def heads(self):
        """(name, logits) pairs of the supervised heads, in loss order."""
        out = [("coarse", self.coarse), ("base", self.base)]
        if self.retouch_levels:
            out.append(("retouch", self.retouch))
        return out


class ToyEncoder:
    """Small stand-in backbone: a stack of stride-2 3x3 conv + ReLU stages.
    Stage i emits 16*2^(i-1) channels at 1/2^(i+1) of the input size."""

    def __init__(self, store, name, levels):
        widths = encoder_stage_channels(levels)
        self.stem = Conv(store, f"{name}.stem", 3, ENCODER_STEM_CHANNELS, 3, stride=2)
        self.stages = []
        prev = ENCODER_STEM_CHANNELS
        for i, width in enumerate(widths):
            self.stages.append(Conv(store, f"{name}.stage{i + 1}", prev, width, 3, stride=2))
            prev = width

    def __call__(self, image):
        x = K.relu(self.stem(image))
        feats = []
        for stage in self.stages:
            x = K.relu(stage(x))
            feats.append(x)
        return feats


class EnrichStage:
    """Channel-attention refinement per level, coarse prediction head, and
    cross-resolution neighbor fusion."""

    def __init__(self, store, name, config):
        c = config.channels
        self.config = config
        self.levels = []
        for i in range(1, config.levels + 1):
            self.levels.append(
                [
                    ChannelAttentionBlock(store, f"{name}.level{i}.cab{j + 1}", c)
                    for j in range(config.cabs_per_level)
                ]
            )
        self.coarse_head = Conv(store, f"{name}.coarse_head", c, 1, 3, head=True)
        self.fuse = []
        for i in range(1, config.levels + 1):
            neighbors = 1 + (i > 1) + (i < config.levels)
            self.fuse.append(Conv(store, f"{name}.fuse{i}", neighbors * c, c, 3))

    def __call__(self, pyramid):
        cfg = self.config
        L = cfg.levels
        refined = [None] * L
        for i in range(L, 0, -1):
            idx = i - 1
            feat = pyramid[idx]
            n, c, h, w = feat.shape
            if i == L:
                cross = K.zeros((n, c, h, w), dtype=feat.dtype.type)
            else:
                cross = K.bilinear_resize(refined[idx + 1], h, w)
            zero_cross = None
            x = feat
            for j, cab in enumerate(self.levels[idx]):
                if j == 0:
                    x = cab(x, cross)
                else:
                    if zero_cross is None:
                        zero_cross = K.zeros((n, c, h, w), dtype=feat.dtype.type)
                    x = cab(x, zero_cross)
            refined[idx] = x
        coarse = self.coarse_head(refined[0])
        fused = []
        for i in range(1, L + 1):
            idx = i - 1
            h, w = refined[idx].shape[2:]
            parts = []
            if i > 1:
                parts.append(K.bilinear_resize(refined[idx - 1], h, w))
            parts.append(refined[idx])
            if i < L:
                parts.append(K.bilinear_resize(refined[idx + 1], h, w))
            fused.append(self.fuse[idx](K.concat_channels(parts)))
        return refined, fused, coarse


class BaseStage:
    """Group-attention decoding from the coarsest level upward, guided by
    the previous level's map (the coarse map at level L)."""

    def __init__(self, store, name, config):
        self.config = config
        self.stages = [
            GroupAttentionStage(store, f"{name}.level{i}", config.channels, GROUP_SIZES)
            for i in range(1, config.levels + 1)
        ]

    def __call__(self, fused, coarse):
        L = self.config.levels
        feats = [None] * L
        maps = [None] * L
        for i in range(L, 0, -1):
            idx = i - 1
            h, w = fused[idx].shape[2:]
            prev = coarse if i == L else maps[idx + 1]
            guide = K.bilinear_resize(prev, h, w)
            feats[idx], maps[idx] = self.stages[idx](fused[idx], guide)
        return feats, maps


class RetouchStage:
    """Spatial-attention map refinement from the coarsest level upward,
    seeded by the base decoder's final map."""

    def __init__(self, store, name, config):
        self.config = config
        self.levels = []
        for i in range(1, config.levels + 1):
            self.levels.append(
                [
                    SpatialAttentionBlock(store, f"{name}.level{i}.sab{j + 1}", config.channels)
                    for j in range(config.sabs_per_level)
                ]
            )

    def __call__(self, feats, base_map):
        L = self.config.levels
        maps = [None] * L
        for i in range(L, 0, -1):
            idx = i - 1
            h, w = feats[idx].shape[2:]
            prev = base_map if i == L else maps[idx + 1]
            m = K.bilinear_resize(prev, h, w)
            for sab in self.levels[idx]:
                m = sab(feats[idx], m)
            maps[idx] = m
        return maps


class EntoNet:
    """End-to-end model; construction is deterministic under (seed, dtype)."""

    def __init__(self, config: EntoConfig, dtype=np.float32, seed=0):
        self.config = config
        self.store = K.ParamStore(dtype=dtype, seed=seed)
        self.encoder = ToyEncoder(self.store, "encoder", config.levels)
        widths = encoder_stage_channels(config.levels)
        self.equalize = [
            Conv(self.store, f"equalize.level{i + 1}", widths[i], config.channels, 3)
            for i in range(config.levels)
        ]
        if config.variant == "full":
            self.enrich = EnrichStage(self.store, "enrich", config)
            self.base = BaseStage(self.store, "base", config)
            self.retouch = RetouchStage(self.store, "retouch", config)
        else:  # base-only ablation: coarse head directly on level-1 features
            self.enrich = None
            self.coarse_head = Conv(self.store, "coarse_head", config.channels, 1, 3, head=True)
            self.base = BaseStage(self.store, "base", config)
            self.retouch = None

    # -- stage wrappers (also used directly by tests) -----------------------

    def encode(self, image):
        n, c, h, w = image.shape
        if c != 3:
            raise ShapeError(f"encoder expects a 3-channel image, got {c} channels")
        if (h, w) != self.config.input_size:
            raise ShapeError(
                f"image size {h}x{w} does not match configured input "
                f"{self.config.input_h}x{self.config.input_w}"
            )
        return self.encoder(image)

    def equalize_channels(self, raw_pyramid):
        if len(raw_pyramid) != self.config.levels:
            raise ShapeError(
                f"expected {self.config.levels} pyramid levels, got {len(raw_pyramid)}"
            )
        return [conv(feat) for conv, feat in zip(self.equalize, raw_pyramid)]

    def forward(self, image):
        pyramid = self.equalize_channels(self.encode(image))
        if self.config.variant == "full":
            _, fused, coarse = self.enrich(pyramid)
            feats, base_maps = self.base(fused, coarse)
            retouch_maps = self.retouch(feats, base_maps[0])
            return PredictionSet(coarse, base_maps, retouch_maps)
        coarse = self.coarse_head(pyramid[0])
        _, base_maps = self.base(pyramid, coarse)
        return PredictionSet(coarse, base_maps, [])

    __call__ = forward


def param_count(net, scope="all"):
    """Total learnable element count; 'decoder_only' excludes the toy encoder."""
    if scope not in ("all", "decoder_only"):
        raise ShapeError(f"scope must be 'all' or 'decoder_only', got {scope!r}")
    exclude = "encoder." if scope == "decoder_only" else None
    return net.store.param_count(exclude_prefix=exclude)
