"""Render a grid of synthetic scenes with their analytic depth maps.

Scenes are slanted planes with hemispherical bumps, Lambertian shading
and a mild depth-dependent brightness falloff; depth is exact geometry,
so these make trustworthy desk-scale train/eval data.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from msfnet import render_scene, synth_generate

samples = synth_generate(seed=2024, count=4, size=64)

fig, axes = plt.subplots(2, 4, figsize=(11, 5.4))
for i, s in enumerate(samples):
    axes[0][i].imshow(s.rgb.permute(1, 2, 0))
    axes[0][i].set_title(f"scene {i}")
    im = axes[1][i].imshow(s.depth[0], cmap="viridis")
    fig.colorbar(im, ax=axes[1][i], fraction=0.046)
    for row in axes:
        row[i].set_axis_off()
fig.tight_layout()
fig.savefig("demo_synthetic_scenes.png", dpi=120)
print("wrote demo_synthetic_scenes.png")

# Determinism and analytic geometry:
again = synth_generate(seed=2024, count=4, size=64)
print("bitwise deterministic:", all(
    (a.rgb == b.rgb).all() and (a.depth == b.depth).all()
    for a, b in zip(samples, again)))
_, flat = render_scene(64, plane=(3.0, 0.0, 0.0), spheres=[])
print(f"fronto-parallel plane at 3 m -> depth is constant {flat.min():.1f}..{flat.max():.1f}")
