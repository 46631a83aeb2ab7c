"""Per-branch deep feature extractor: 7x7 stem plus bottleneck residual stages.

Branch tensors (C x T x I) map onto convolution inputs as channels = C,
height = T (time) and width = I (joints).  Each bottleneck block is a 3x3
convolution flanked by two 1x1 convolutions with an identity (or projected)
skip path; the residual path ends un-activated so zeroed weights make a block
the exact identity on non-negative inputs.  No normalization layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DataError

STEM_KERNEL = 7

# Desk-scale default: two stages of two blocks each, widths 16 and 32.
DEFAULT_STAGE_BLOCKS = ((2, 16, 1), (2, 32, 2))

# The full 50-layer stage plan remains expressible: widths 256..2048 with
# block counts (3, 4, 6, 3) and stride-2 stages after the first.
RESNET50_STAGE_BLOCKS = ((3, 256, 1), (4, 512, 2), (6, 1024, 2), (3, 2048, 2))


@dataclass(frozen=True)
class ExtractorConfig:
    stem_channels: int
    stage_blocks: tuple[tuple[int, int, int], ...]
    input_channels: int

    def __post_init__(self):
        if self.stem_channels < 1:
            raise ConfigError(f"stem_channels must be positive, got {self.stem_channels}")
        if self.input_channels < 1:
            raise ConfigError(f"input_channels must be positive, got {self.input_channels}")
        if len(self.stage_blocks) < 1:
            raise ConfigError("at least one stage is required")
        for stage in self.stage_blocks:
            if len(stage) != 3:
                raise ConfigError(f"stage spec must be (count, width, stride), got {stage}")
            count, width, stride = stage
            if count < 1 or width < 1 or stride < 1:
                raise ConfigError(f"stage entries must be positive, got {stage}")

    @property
    def out_channels(self) -> int:
        return self.stage_blocks[-1][1]

    def output_spatial(self, height: int, width: int) -> tuple[int, int]:
        """Spatial extent after the stem and all stages (stem is stride 1)."""
        h, w = height, width
        for _, _, stride in self.stage_blocks:
            h = (h + 2 - 3) // stride + 1
            w = (w + 2 - 3) // stride + 1
        return h, w

    def output_shape(self, height: int, width: int) -> tuple[int, int, int]:
        h, w = self.output_spatial(height, width)
        return self.out_channels, h, w


def _uniform_init(rng: np.random.Generator, c_out: int, c_in: int, k: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(c_in * k * k)
    return rng.uniform(-bound, bound, size=(c_out, c_in, k, k))


class BottleneckBlock:
    """reduce 1x1 -> relu -> 3x3 (carries the stride) -> relu -> expand 1x1, plus skip."""

    def __init__(self, prefix: str, in_channels: int, width: int, stride: int,
                 rng: np.random.Generator):
        mid = max(1, width // 4)
        self.stride = stride
        self.reduce = ad.Parameter(f"{prefix}.reduce.kernel",
                                   _uniform_init(rng, mid, in_channels, 1))
        self.conv = ad.Parameter(f"{prefix}.conv.kernel",
                                 _uniform_init(rng, mid, mid, 3))
        self.expand = ad.Parameter(f"{prefix}.expand.kernel",
                                   _uniform_init(rng, width, mid, 1))
        if in_channels != width or stride != 1:
            self.projection = ad.Parameter(f"{prefix}.proj.kernel",
                                           _uniform_init(rng, width, in_channels, 1))
        else:
            self.projection = None

    def parameters(self) -> list[ad.Parameter]:
        params = [self.reduce, self.conv, self.expand]
        if self.projection is not None:
            params.append(self.projection)
        return params

    def forward(self, x: ad.Tensor) -> ad.Tensor:
        out = ad.relu(ad.conv2d(x, self.reduce, stride=1, padding=0))
        out = ad.relu(ad.conv2d(out, self.conv, stride=self.stride, padding=1))
        out = ad.conv2d(out, self.expand, stride=1, padding=0)
        if self.projection is not None:
            skip = ad.conv2d(x, self.projection, stride=self.stride, padding=0)
        else:
            skip = x
        return ad.relu(ad.add(skip, out))


class ResidualExtractor:
    """Stem convolution plus the configured bottleneck stages."""

    def __init__(self, config: ExtractorConfig, rng: np.random.Generator,
                 prefix: str = "extractor"):
        self.config = config
        self.prefix = prefix
        self.stem = ad.Parameter(
            f"{prefix}.stem.kernel",
            _uniform_init(rng, config.stem_channels, config.input_channels, STEM_KERNEL),
        )
        self.blocks: list[BottleneckBlock] = []
        in_channels = config.stem_channels
        for s, (count, width, stride) in enumerate(config.stage_blocks):
            for b in range(count):
                block = BottleneckBlock(
                    f"{prefix}.stage{s}.block{b}", in_channels, width,
                    stride if b == 0 else 1, rng,
                )
                self.blocks.append(block)
                in_channels = width

    @property
    def out_channels(self) -> int:
        return self.config.out_channels

    def parameters(self) -> list[ad.Parameter]:
        params = [self.stem]
        for block in self.blocks:
            params.extend(block.parameters())
        return params

    def forward(self, x: ad.Tensor) -> ad.Tensor:
        if x.ndim != 4:
            raise DataError(f"extractor input must be 4D (N, C, H, W), got {x.shape}")
        if x.shape[1] != self.config.input_channels:
            raise DataError(
                f"extractor expects {self.config.input_channels} input channels, "
                f"got {x.shape[1]}"
            )
        out = ad.relu(ad.conv2d(x, self.stem, stride=1, padding=STEM_KERNEL // 2))
        for block in self.blocks:
            out = block.forward(out)
        return out


def build_extractor(config: ExtractorConfig, rng: np.random.Generator,
                    prefix: str = "extractor") -> ResidualExtractor:
    """Build an extractor with deterministic fan-in-scaled uniform initialization.

    Parameter names and initialization draws are stable for a given config and
    generator state, so equal seeds yield byte-identical parameters.
    """
    return ResidualExtractor(config, rng, prefix=prefix)
