"""Spatial attention gates built from channel-wise pooling statistics.

Two gate flavours share the same machinery: a 7x7 convolution over two
pooled single-channel maps, squashed by a sigmoid and broadcast-multiplied
over every channel of the input.  The min-subtracted variant feeds the
difference maps [avg - min ; max - min] into the convolution, the plain
variant feeds [avg ; max].
"""

from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F


class PooledMaps(NamedTuple):
    """Channel-wise max / min / mean maps, each (B, 1, H, W)."""

    x_max: torch.Tensor
    x_min: torch.Tensor
    x_avg: torch.Tensor


def channel_pool(x: torch.Tensor) -> PooledMaps:
    """Reduce (B, C, H, W) along the channel axis with max, min and mean.

    Raises ValueError if the input is not 4-D or has no channels.
    """
    if x.dim() != 4:
        raise ValueError(f"expected a (B, C, H, W) tensor, got shape {tuple(x.shape)}")
    if x.shape[1] < 1:
        raise ValueError("channel dimension is empty")
    x_max = x.amax(dim=1, keepdim=True)
    x_min = x.amin(dim=1, keepdim=True)
    x_avg = x.mean(dim=1, keepdim=True)
    return PooledMaps(x_max=x_max, x_min=x_min, x_avg=x_avg)


def _validate_gate_params(weight: torch.Tensor, bias: torch.Tensor) -> None:
    if tuple(weight.shape) != (1, 2, 7, 7):
        raise ValueError(f"gate conv weight must have shape (1, 2, 7, 7), got {tuple(weight.shape)}")
    if bias.numel() != 1:
        raise ValueError(f"gate conv bias must be a scalar, got {bias.numel()} elements")


def eda_forward(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """Min-subtracted spatial gate: sigmoid(conv7x7([avg-min ; max-min])) * x.

    The single-channel gate multiplies all channels; zero padding of 3
    keeps the spatial size, so the output shape equals the input shape.
    """
    _validate_gate_params(weight, bias)
    pooled = channel_pool(x)
    stats = torch.cat([pooled.x_avg - pooled.x_min, pooled.x_max - pooled.x_min], dim=1)
    gate = torch.sigmoid(F.conv2d(stats, weight, bias.reshape(1), padding=3))
    return gate * x


def cbam_s_forward(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """Plain spatial gate over [avg ; max] pooled maps (ablation baseline)."""
    _validate_gate_params(weight, bias)
    pooled = channel_pool(x)
    stats = torch.cat([pooled.x_avg, pooled.x_max], dim=1)
    gate = torch.sigmoid(F.conv2d(stats, weight, bias.reshape(1), padding=3))
    return gate * x


class SpatialGate(nn.Module):
    """Learnable spatial attention gate.

    mode="eda" uses the min-subtracted difference maps, mode="cbam_s" the
    plain [avg ; max] statistics.  Both hold a single Conv2d(2 -> 1, 7x7,
    padding 3) whose weights are Xavier-initialized.
    """

    MODES = ("eda", "cbam_s")

    def __init__(self, mode: str = "eda"):
        super().__init__()
        if mode not in self.MODES:
            raise ValueError(f"unknown gate mode {mode!r}, expected one of {self.MODES}")
        self.mode = mode
        self.conv = nn.Conv2d(2, 1, kernel_size=7, padding=3)
        nn.init.xavier_uniform_(self.conv.weight)
        nn.init.zeros_(self.conv.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        fn = eda_forward if self.mode == "eda" else cbam_s_forward
        return fn(x, self.conv.weight, self.conv.bias)

    def extra_repr(self) -> str:
        return f"mode={self.mode}"
