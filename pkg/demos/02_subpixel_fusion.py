"""Sub-pixel upsampling and the five-stage fusion path, step by step.

Shows that the channel-to-space rearrangement is a lossless bijection,
then traces tensor shapes through a fusion module built for a 64x64
input: every stage is lifted to half resolution by chains of r=2
Up-blocks, pooled to a common size, merged, and refined.
"""

import torch

from msfnet import USFModule, subpixel_downsample, subpixel_upsample

torch.manual_seed(0)

x = torch.randn(1, 8, 5, 7)
up = subpixel_upsample(x, 2)
back = subpixel_downsample(up, 2)
print(f"shuffle: {tuple(x.shape)} -> {tuple(up.shape)} -> {tuple(back.shape)}")
print(f"round trip exact: {torch.equal(back, x)}")
print(f"energy conserved: {torch.allclose((x ** 2).sum(), (up ** 2).sum())}")

# One pixel's four channels land in a 2x2 spatial block:
probe = torch.arange(4.0).reshape(1, 4, 1, 1)
print(f"channels {probe.flatten().tolist()} -> block\n{subpixel_upsample(probe, 2)[0, 0]}")

stage_channels = (16, 32, 64, 128, 256)
usf = USFModule(stage_channels, width=16)
feats = [torch.randn(1, c, 64 // 2 ** (s + 1), 64 // 2 ** (s + 1))
         for s, c in enumerate(stage_channels)]
print("\nstage features for a 64x64 input:")
for s, f in enumerate(feats):
    n_blocks = max(1, s)
    print(f"  stage{s}: {tuple(f.shape)}  ({n_blocks} up-block{'s' if n_blocks > 1 else ''})")
fused = usf(feats)
print(f"fused output: {tuple(fused.shape)}  (half the input resolution)")
