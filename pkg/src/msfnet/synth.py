"""Analytic synthetic scenes for desk-scale training and testing.

Each scene is a slanted background plane plus a few hemispherical bumps,
rendered with Lambertian shading and a mild inverse-distance brightness
falloff, so image intensity carries a usable depth cue.  Depth is exact
analytic geometry, masks are dense, and generation is bitwise
deterministic in (seed, index).
"""

import numpy as np
import torch

from .data import DEPTH_RANGES, Sample

AMBIENT = 0.25
ATTENUATION = 0.08


def render_scene(size: int, plane: tuple[float, float, float],
                 spheres: list[dict] | None = None,
                 light: tuple[float, float, float] = (0.3, -0.4, 0.9),
                 plane_albedo: tuple[float, float, float] = (0.7, 0.7, 0.7),
                 depth_range: tuple[float, float] = DEPTH_RANGES["synthetic"],
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Render one scene to (rgb (3,S,S) in [0,1], depth (S,S) meters).

    plane = (z0, gx, gy) gives depth z0 + gx*u + gy*v over image coords
    u, v in [-1, 1]; a fronto-parallel plane is (z0, 0, 0).  Each sphere
    dict has center (cu, cv), radius, height, depth zc at its apex and an
    albedo triple; spheres occlude the plane where they are nearer.
    """
    spheres = spheres or []
    coords = np.linspace(-1.0, 1.0, size)
    u = coords[None, :].repeat(size, axis=0)
    v = coords[:, None].repeat(size, axis=1)

    z0, gx, gy = plane
    depth = z0 + gx * u + gy * v
    normals = np.stack(np.broadcast_arrays(-gx, -gy, np.ones_like(u)), axis=-1)
    albedo = np.broadcast_to(np.asarray(plane_albedo, dtype=np.float64), (size, size, 3)).copy()

    for sph in spheres:
        cu, cv, rho, height, zc = (sph["cu"], sph["cv"], sph["radius"],
                                   sph["height"], sph["zc"])
        du, dv = u - cu, v - cv
        d2 = (du ** 2 + dv ** 2) / rho ** 2
        inside = d2 < 1.0
        bulge = np.sqrt(np.clip(1.0 - d2, 0.0, None))
        z_sph = zc + height * (1.0 - bulge)  # apex at zc, rim at zc + height
        hit = inside & (z_sph < depth)
        depth = np.where(hit, z_sph, depth)
        denom = np.maximum(bulge, 0.05)
        n_sph = np.stack([-height * du / (rho ** 2 * denom),
                          -height * dv / (rho ** 2 * denom),
                          np.ones_like(u)], axis=-1)
        normals = np.where(hit[..., None], n_sph, normals)
        albedo = np.where(hit[..., None],
                          np.asarray(sph["albedo"], dtype=np.float64), albedo)

    normals = normals / np.linalg.norm(normals, axis=-1, keepdims=True)
    l = np.asarray(light, dtype=np.float64)
    l = l / np.linalg.norm(l)
    lambert = np.clip(normals @ l, 0.0, 1.0)
    shade = AMBIENT + (1.0 - AMBIENT) * lambert

    depth = np.clip(depth, depth_range[0], depth_range[1])
    falloff = 1.0 / (1.0 + ATTENUATION * depth)
    rgb = np.clip(albedo * (shade * falloff)[..., None], 0.0, 1.0)
    return rgb.transpose(2, 0, 1).astype(np.float32), depth.astype(np.float32)


def synth_generate(seed: int, count: int, size: int = 64,
                   depth_range: tuple[float, float] = DEPTH_RANGES["synthetic"],
                   ) -> list[Sample]:
    """Deterministically generate `count` random scenes of a given size."""
    if size % 32 != 0:
        raise ValueError(f"size must be divisible by 32, got {size}")
    samples = []
    for index in range(count):
        rng = np.random.default_rng([int(seed), index])
        z0 = rng.uniform(2.0, 6.0)
        gx, gy = rng.uniform(-1.2, 1.2, size=2)
        spheres = []
        for _ in range(int(rng.integers(1, 4))):
            cu, cv = rng.uniform(-0.6, 0.6, size=2)
            center_depth = z0 + gx * cu + gy * cv
            zc = max(center_depth - rng.uniform(0.3, 1.2), depth_range[0] + 0.2)
            spheres.append({
                "cu": cu, "cv": cv,
                "radius": rng.uniform(0.2, 0.5),
                "height": rng.uniform(0.3, 1.0),
                "zc": zc,
                "albedo": tuple(rng.uniform(0.25, 1.0, size=3)),
            })
        light = rng.uniform(-0.5, 0.5, size=3)
        light[2] = rng.uniform(0.6, 1.0)
        rgb, depth = render_scene(
            size, plane=(z0, gx, gy), spheres=spheres, light=tuple(light),
            plane_albedo=tuple(rng.uniform(0.25, 1.0, size=3)),
            depth_range=depth_range)
        samples.append(Sample(
            rgb=torch.from_numpy(rgb),
            depth=torch.from_numpy(depth)[None],
            mask=torch.ones(1, size, size, dtype=torch.bool),
            dataset="synthetic",
            target_space="inverse_depth",
            depth_space="metric",
            info={"seed": int(seed), "index": index}))
    return samples
