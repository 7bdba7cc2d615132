"""Multi-stage feature fusion built on sub-pixel upsampling.

The fusion path takes the five encoder stage features (finest to coarsest,
each half the resolution of the previous), lifts every stage to half the
input resolution with chains of sub-pixel Up-blocks, unifies sizes with
adaptive average pooling, merges with a convolution, and refines the merged
map with a dual-normalization residual block (RDR).
"""

from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

LEAKY_SLOPE = 0.2


def subpixel_upsample(x: torch.Tensor, r: int) -> torch.Tensor:
    """Rearrange (B, C*r^2, H, W) into (B, C, r*H, r*W).

    Pure periodic rearrangement (pixel shuffle): output pixel (r*h + i,
    r*w + j) of channel c is input pixel (h, w) of channel c*r^2 + i*r + j.
    Bijective on elements, so it conserves sums of squares exactly.
    """
    if r < 1:
        raise ValueError(f"upscale factor must be a positive integer, got {r}")
    b, c, h, w = x.shape
    if c % (r * r) != 0:
        raise ValueError(f"channel count {c} is not divisible by r^2 = {r * r}")
    c_out = c // (r * r)
    x = x.reshape(b, c_out, r, r, h, w)
    x = x.permute(0, 1, 4, 2, 5, 3)  # b, c_out, h, r, w, r
    return x.reshape(b, c_out, h * r, w * r)


def subpixel_downsample(x: torch.Tensor, r: int) -> torch.Tensor:
    """Exact inverse of :func:`subpixel_upsample`."""
    if r < 1:
        raise ValueError(f"downscale factor must be a positive integer, got {r}")
    b, c, h, w = x.shape
    if h % r != 0 or w % r != 0:
        raise ValueError(f"spatial size ({h}, {w}) is not divisible by r = {r}")
    x = x.reshape(b, c, h // r, r, w // r, r)
    x = x.permute(0, 1, 3, 5, 2, 4)  # b, c, r, r, h/r, w/r
    return x.reshape(b, c * r * r, h // r, w // r)


def adaptive_pool(x: torch.Tensor, out_h: int, out_w: int) -> torch.Tensor:
    """Adaptive average pooling to (out_h, out_w), downsampling only.

    Bin s along an axis of length N covers input rows floor(s*N/out) up to
    ceil((s+1)*N/out) - 1.  Requesting an output larger than the input is
    an error; equal sizes return the input unchanged.
    """
    h, w = x.shape[-2:]
    if out_h > h or out_w > w:
        raise ValueError(
            f"adaptive pooling cannot enlarge: input ({h}, {w}) -> requested ({out_h}, {out_w})"
        )
    if (out_h, out_w) == (h, w):
        return x
    return F.adaptive_avg_pool2d(x, (out_h, out_w))


class UpBlock(nn.Module):
    """3x3 convolution emitting out_channels * r^2 maps, then pixel shuffle.

    A leaky-ReLU follows the shuffle so stacked blocks stay nonlinear.
    """

    def __init__(self, in_channels: int, out_channels: int, r: int = 2):
        super().__init__()
        self.r = r
        self.conv = nn.Conv2d(in_channels, out_channels * r * r, kernel_size=3, padding=1)
        nn.init.xavier_uniform_(self.conv.weight)
        nn.init.zeros_(self.conv.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = subpixel_upsample(self.conv(x), self.r)
        return F.leaky_relu(x, LEAKY_SLOPE)


class RDRBlock(nn.Module):
    """Channel-squeeze refinement with a dual-normalization split.

    Pipeline: 1x1 squeeze -> split channels in half -> one half through
    instance norm + 3x1 + 1x3 convs, the other through batch norm + the
    same separable pair -> concat -> 3x3 conv -> residual add with the
    squeeze output -> 1x1 projection.  Spatial size is preserved
    throughout.  Batch-norm running statistics update only in training
    mode (momentum 0.1); evaluation uses the running estimates.
    """

    def __init__(self, in_channels: int, squeeze_channels: int | None = None,
                 out_channels: int | None = None):
        super().__init__()
        if squeeze_channels is None:
            squeeze_channels = in_channels // 2
            squeeze_channels -= squeeze_channels % 2  # default rounds to even
        if squeeze_channels < 2 or squeeze_channels % 2:
            raise ValueError(f"squeeze channel count must be an even number >= 2, got {squeeze_channels}")
        if out_channels is None:
            out_channels = squeeze_channels
        half = squeeze_channels // 2
        self.squeeze = nn.Conv2d(in_channels, squeeze_channels, kernel_size=1)
        self.in_norm = nn.InstanceNorm2d(half, affine=True, eps=1e-5)
        self.in_conv3x1 = nn.Conv2d(half, half, kernel_size=(3, 1), padding=(1, 0))
        self.in_conv1x3 = nn.Conv2d(half, half, kernel_size=(1, 3), padding=(0, 1))
        self.bn_norm = nn.BatchNorm2d(half, momentum=0.1, eps=1e-5)
        self.bn_conv3x1 = nn.Conv2d(half, half, kernel_size=(3, 1), padding=(1, 0))
        self.bn_conv1x3 = nn.Conv2d(half, half, kernel_size=(1, 3), padding=(0, 1))
        self.merge = nn.Conv2d(squeeze_channels, squeeze_channels, kernel_size=3, padding=1)
        self.out = nn.Conv2d(squeeze_channels, out_channels, kernel_size=1)
        self.squeeze_channels = squeeze_channels
        self.out_channels = out_channels
        for m in (self.squeeze, self.in_conv3x1, self.in_conv1x3,
                  self.bn_conv3x1, self.bn_conv1x3, self.merge, self.out):
            nn.init.xavier_uniform_(m.weight)
            nn.init.zeros_(m.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeezed = self.squeeze(x)
        half = self.squeeze_channels // 2
        a, b = squeezed[:, :half], squeezed[:, half:]
        a = self.in_conv1x3(self.in_conv3x1(self.in_norm(a)))
        b = self.bn_conv1x3(self.bn_conv3x1(self.bn_norm(b)))
        merged = self.merge(torch.cat([a, b], dim=1)) + squeezed
        return self.out(merged)


def validate_stage_set(features: Sequence[torch.Tensor]) -> None:
    """Check the five-stage feature contract: shared batch, halving sizes."""
    if len(features) != 5:
        raise ValueError(f"expected 5 stage features, got {len(features)}")
    batches = {f.shape[0] for f in features}
    if len(batches) != 1:
        raise ValueError(f"stage features disagree on batch size: {sorted(batches)}")
    for s in range(4):
        h, w = features[s].shape[-2:]
        h_next, w_next = features[s + 1].shape[-2:]
        if (h_next * 2, w_next * 2) != (h, w):
            raise ValueError(
                f"stage {s + 1} size {(h_next, w_next)} is not half of stage {s} size {(h, w)}"
            )


class USFModule(nn.Module):
    """Fuse five stage features into one half-resolution map.

    Stage s sits at 1/2^(s+1) of the input resolution; its chain of r=2
    Up-blocks first projects to `width` channels and doubles the size
    max(1, s) times, after which adaptive pooling brings every stage to
    the stage-0 size (half the input).  The pooled maps are concatenated,
    merged by a 3x3 conv block, pooled again to the common size, and
    refined by the RDR block.
    """

    def __init__(self, stage_channels: Sequence[int], width: int = 16,
                 out_channels: int | None = None):
        super().__init__()
        if len(stage_channels) != 5:
            raise ValueError(f"expected 5 stage channel counts, got {len(stage_channels)}")
        self.width = width
        chains = []
        for s, c_in in enumerate(stage_channels):
            n_blocks = max(1, s)
            blocks = [UpBlock(c_in, width)]
            blocks += [UpBlock(width, width) for _ in range(n_blocks - 1)]
            chains.append(nn.Sequential(*blocks))
        self.chains = nn.ModuleList(chains)
        concat = 5 * width
        self.merge = nn.Conv2d(concat, concat, kernel_size=3, padding=1)
        nn.init.xavier_uniform_(self.merge.weight)
        nn.init.zeros_(self.merge.bias)
        self.rdr = RDRBlock(concat, out_channels=out_channels)
        self.out_channels = self.rdr.out_channels

    def forward(self, features: Sequence[torch.Tensor]) -> torch.Tensor:
        validate_stage_set(features)
        target_h, target_w = features[0].shape[-2:]
        lifted = []
        for chain, feat in zip(self.chains, features):
            z = chain(feat)
            lifted.append(adaptive_pool(z, target_h, target_w))
        z = torch.cat(lifted, dim=1)
        z = F.leaky_relu(self.merge(z), LEAKY_SLOPE)
        z = adaptive_pool(z, target_h, target_w)
        return self.rdr(z)
