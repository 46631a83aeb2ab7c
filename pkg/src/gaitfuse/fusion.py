"""Multi-branch feature fusion with channel-attention-style excitation.

Five steps: (1) concatenate the proportion and skeletal maps into a spatial
stream and pool it together with the velocity stream into a joint descriptor,
(2) project the descriptor to a reduced dimension, (3) produce per-branch
sigmoid excitations, (4) recalibrate each stream by its excitation, and
(5) pool and concatenate into the global feature vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DataError

DEFAULT_REDUCTION_RATIO = 4


@dataclass(frozen=True)
class FusionConfig:
    spatial_channels: int
    velocity_channels: int
    reduction_ratio: int = DEFAULT_REDUCTION_RATIO

    def __post_init__(self):
        if self.spatial_channels < 1 or self.velocity_channels < 1:
            raise ConfigError("channel counts must be positive")
        if self.reduction_ratio < 1:
            raise ConfigError(f"reduction_ratio must be positive, got {self.reduction_ratio}")
        if self.reduced_dim < 1:
            raise ConfigError(
                f"reduction_ratio {self.reduction_ratio} leaves no channels: "
                f"({self.spatial_channels} + {self.velocity_channels}) // "
                f"{self.reduction_ratio} < 1"
            )

    @property
    def total_channels(self) -> int:
        return self.spatial_channels + self.velocity_channels

    @property
    def reduced_dim(self) -> int:
        return (self.spatial_channels + self.velocity_channels) // self.reduction_ratio


@dataclass(frozen=True)
class Excitation:
    """Per-channel attention weights for the spatial and velocity streams."""

    e_w: ad.Tensor
    e_v: ad.Tensor


@dataclass(frozen=True)
class GlobalFeature:
    """Final pooled descriptor of dimension spatial_channels + velocity_channels."""

    values: ad.Tensor


class FusionParams:
    """Learnable weights of the fusion module: one reduction and two excitation heads."""

    def __init__(self, config: FusionConfig, rng: np.random.Generator, prefix: str = "mff"):
        self.config = config
        d_in = config.total_channels
        d_mid = config.reduced_dim

        def linear(name, fan_in, fan_out):
            bound = 1.0 / np.sqrt(fan_in)
            w = ad.Parameter(f"{prefix}.{name}.weight",
                             rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            b = ad.Parameter(f"{prefix}.{name}.bias", np.zeros(fan_out))
            return w, b

        self.reduce_w, self.reduce_b = linear("reduce", d_in, d_mid)
        self.excite_w_w, self.excite_w_b = linear("excite_w", d_mid, config.spatial_channels)
        self.excite_v_w, self.excite_v_b = linear("excite_v", d_mid, config.velocity_channels)

    def parameters(self) -> list[ad.Parameter]:
        return [
            self.reduce_w, self.reduce_b,
            self.excite_w_w, self.excite_w_b,
            self.excite_v_w, self.excite_v_b,
        ]


def aggregate_spatial(proportion_map: ad.Tensor, skeletal_map: ad.Tensor) -> ad.Tensor:
    """Step 1a: channel-concatenate the two spatially aligned streams."""
    if proportion_map.ndim != 4 or skeletal_map.ndim != 4:
        raise DataError("aggregate_spatial expects 4D feature maps")
    if proportion_map.shape[0] != skeletal_map.shape[0]:
        raise DataError(
            f"batch mismatch: {proportion_map.shape[0]} vs {skeletal_map.shape[0]}"
        )
    if proportion_map.shape[2:] != skeletal_map.shape[2:]:
        raise DataError(
            "proportion and skeletal maps must share spatial extent, got "
            f"{proportion_map.shape[2:]} vs {skeletal_map.shape[2:]}"
        )
    return ad.concat([proportion_map, skeletal_map], axis=1)


def joint_descriptor(f_w: ad.Tensor, f_v: ad.Tensor) -> ad.Tensor:
    """Step 1b: pool each stream spatially and concatenate the channel means."""
    return ad.concat([ad.global_avg_pool(f_w), ad.global_avg_pool(f_v)], axis=1)


def reduce(f_c: ad.Tensor, W: ad.Tensor, b: ad.Tensor) -> ad.Tensor:
    """Step 2: project the joint descriptor to the reduced dimension."""
    return ad.affine(f_c, W, b)


def excite(f_a: ad.Tensor, W_w: ad.Tensor, b_w: ad.Tensor,
           W_v: ad.Tensor, b_v: ad.Tensor) -> Excitation:
    """Step 3: sigmoid excitation heads for the spatial and velocity streams."""
    return Excitation(
        e_w=ad.sigmoid(ad.affine(f_a, W_w, b_w)),
        e_v=ad.sigmoid(ad.affine(f_a, W_v, b_v)),
    )


def recalibrate(f_w: ad.Tensor, f_v: ad.Tensor, e: Excitation) -> tuple[ad.Tensor, ad.Tensor]:
    """Step 4: scale every channel of each stream by its excitation weight."""
    if f_w.shape[1] != e.e_w.shape[1]:
        raise DataError(
            f"spatial excitation has {e.e_w.shape[1]} channels, map has {f_w.shape[1]}"
        )
    if f_v.shape[1] != e.e_v.shape[1]:
        raise DataError(
            f"velocity excitation has {e.e_v.shape[1]} channels, map has {f_v.shape[1]}"
        )
    return ad.hadamard(f_w, e.e_w), ad.hadamard(f_v, e.e_v)


def global_feature(recal_w: ad.Tensor, recal_v: ad.Tensor) -> GlobalFeature:
    """Step 5: pool the recalibrated streams and concatenate into one vector."""
    return GlobalFeature(joint_descriptor(recal_w, recal_v))


def mff_forward(proportion_map: ad.Tensor, skeletal_map: ad.Tensor,
                velocity_map: ad.Tensor, params: FusionParams) -> GlobalFeature:
    """Steps 1-5 in order on a single tape."""
    f_w = aggregate_spatial(proportion_map, skeletal_map)
    f_c = joint_descriptor(f_w, velocity_map)
    f_a = reduce(f_c, params.reduce_w, params.reduce_b)
    e = excite(f_a, params.excite_w_w, params.excite_w_b,
               params.excite_v_w, params.excite_v_b)
    recal_w, recal_v = recalibrate(f_w, velocity_map, e)
    return global_feature(recal_w, recal_v)
