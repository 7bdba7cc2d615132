"""Walk through the two spatial attention gates on a synthetic feature map.

The gates squeeze a feature tensor to channel statistics, run them through
a 7x7 convolution and a sigmoid, and multiply the result back over every
channel.  The min-subtracted variant reads [avg - min ; max - min]; the
plain variant reads [avg ; max].  This script renders both gate maps side
by side for a feature map with a bright localized blob.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import torch

from msfnet import SpatialGate, channel_pool

torch.manual_seed(0)

# A 16-channel feature map: smooth background plus a hot blob in one corner.
x = 0.3 * torch.randn(1, 16, 48, 48)
yy, xx = torch.meshgrid(torch.arange(48), torch.arange(48), indexing="ij")
blob = torch.exp(-(((yy - 12) ** 2 + (xx - 34) ** 2) / 40.0))
x[0, :8] += blob

pooled = channel_pool(x)
print("pooled map ranges:")
for name, m in zip(("max", "min", "avg"), (pooled.x_max, pooled.x_min, pooled.x_avg)):
    print(f"  x_{name}: [{m.min():.3f}, {m.max():.3f}]")

eda = SpatialGate("eda")
cbam = SpatialGate("cbam_s")
cbam.load_state_dict(eda.state_dict())  # same 7x7 kernel, different statistics

with torch.no_grad():
    gate_eda = eda(x)[0, 0] / x[0, 0]
    gate_cbam = cbam(x)[0, 0] / x[0, 0]

print(f"eda gate range:  [{gate_eda.min():.3f}, {gate_eda.max():.3f}]")
print(f"cbam gate range: [{gate_cbam.min():.3f}, {gate_cbam.max():.3f}]")

fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
for ax, img, title in zip(
        axes,
        (pooled.x_avg[0, 0], gate_eda, gate_cbam),
        ("channel-avg input", "min-subtracted gate", "plain gate")):
    im = ax.imshow(img, cmap="viridis")
    ax.set_title(title)
    ax.set_axis_off()
    fig.colorbar(im, ax=ax, fraction=0.046)
fig.tight_layout()
fig.savefig("demo_attention_gates.png", dpi=120)
print("wrote demo_attention_gates.png")
