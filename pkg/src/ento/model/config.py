"""Network configuration."""

from dataclasses import dataclass

from ..errors import ConfigError

# fixed architecture constants: four group-attention ops per stage,
# group counts doubling 1 -> 32
GA_OPS_PER_STAGE = 4
GROUP_SIZES = (1, 8, 16, 32)

VARIANTS = ("full", "base")


@dataclass(frozen=True)
class EntoConfig:
    levels: int = 4
    channels: int = 64
    cabs_per_level: int = 6
    sabs_per_level: int = 6
    input_h: int = 64
    input_w: int = 64
    variant: str = "full"

    def __post_init__(self):
        if self.levels < 2:
            raise ConfigError(f"levels must be >= 2, got {self.levels}")
        if self.channels < 32 or self.channels % max(GROUP_SIZES) != 0:
            raise ConfigError(
                f"channels must be a positive multiple of {max(GROUP_SIZES)}, got {self.channels}"
            )
        if self.cabs_per_level < 1 or self.sabs_per_level < 1:
            raise ConfigError("cabs_per_level and sabs_per_level must be >= 1")
        div = 2 ** (self.levels + 1)
        if self.input_h % div or self.input_w % div:
            raise ConfigError(
                f"input size {self.input_h}x{self.input_w} must be divisible by {div} "
                f"(2^(levels+1))"
            )
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def level_size(self, level):
        """Spatial size of features at 1-based ``level``."""
        f = 2 ** (level + 1)
        return self.input_h // f, self.input_w // f

    @property
    def input_size(self):
        return self.input_h, self.input_w
