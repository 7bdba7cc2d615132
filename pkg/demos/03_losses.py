"""How the hard-example weighted loss differs from plain L1.

The weighted term adds a softmax-of-error weighted mean on top of the
plain mean, so concentrating the same total error into fewer pixels
raises the loss.  Plain L1 cannot tell those situations apart.
"""

import torch

from msfnet import LossConfig, NetworkOutput, batch_loss, masked_l1, total_loss

torch.manual_seed(0)

n = 64
gt = torch.zeros(1, 1, 8, 8)
mask = torch.ones_like(gt, dtype=torch.bool)

print(f"{'error pattern':<36s} {'L1':>8s} {'weighted':>9s}")
for k in (64, 16, 4, 1):
    pred = torch.zeros_like(gt)
    pred.reshape(-1)[:k] = 64.0 / k  # same total error, concentrated in k pixels
    l1 = float(masked_l1(pred, gt, mask))
    bl = float(batch_loss(pred, gt, mask))
    print(f"{k:3d} pixel(s) x {64.0 / k:5.1f}                 {l1:8.3f} {bl:9.3f}")

# The full objective combines the weighted term with gradient, structural
# and auxiliary terms:
pred = gt + 0.1 * torch.randn_like(gt)
out = NetworkOutput(pred, pred + 0.05, pred - 0.05)
cfg = LossConfig(lambda_=1.0, mu=1.0, ssim_window=5)
breakdown = total_loss(out, gt + 0.5, mask, cfg)
print("\ncombined objective on a noisy prediction:")
for name, value in breakdown.as_floats().items():
    print(f"  {name:<12s} {value:.4f}")
