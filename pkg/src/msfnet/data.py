"""Dataset ingestion, preprocessing, augmentation and prediction postprocessing.

Indoor (nyu) frames are 640x480 with dense depth: images are halved to
320x240 and center-cropped to 304x228; training targets are the depth map
put through the same crop, downsampled to 152x114 and converted to inverse
depth.  Driving (kitti) frames keep sparse LIDAR depth: training uses a
random 385x513 crop with the depth subsampled to 193x257, values beyond
80 m masked out, and metric-depth targets.  A sample records which space
its stored depth lives in (`depth_space`) separately from the space the
network regresses (`target_space`).
"""

import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage

DATASETS = ("nyu", "kitti", "synthetic")
TARGET_SPACES = ("inverse_depth", "metric_depth")

# Regression target space by dataset: indoor-style datasets train on
# inverse depth, driving data on metric depth.
DATASET_TARGET_SPACE = {"nyu": "inverse_depth", "synthetic": "inverse_depth",
                        "kitti": "metric_depth"}

# (min, max) metric depth used when clamping predictions, per dataset.
DEPTH_RANGES = {"nyu": (0.1, 10.0), "kitti": (0.001, 80.0), "synthetic": (0.5, 10.0)}

# Stored depth value -> meters divisor for 16-bit depth image files.
DEPTH_SCALES = {"nyu": 1000.0, "kitti": 256.0}

KITTI_MAX_DEPTH = 80.0

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

NYU_RAW_HW = (480, 640)
NYU_RESIZE_HW = (240, 320)
NYU_CROP_HW = (228, 304)
NYU_TRAIN_DEPTH_HW = (114, 152)
KITTI_CROP_HW = (385, 513)
KITTI_TRAIN_DEPTH_HW = (193, 257)


@dataclass
class Sample:
    """One training or evaluation item.

    rgb is (3, H, W) in [0, 1] before normalization; depth is (1, h, w)
    holding inverse or metric values per `depth_space` and is strictly
    positive wherever mask is true.
    """

    rgb: torch.Tensor
    depth: torch.Tensor
    mask: torch.Tensor
    dataset: str
    target_space: str
    depth_space: str = "metric"
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AugmentationPolicy:
    p_hflip: float = 0.5
    p_channel_permute: float = 0.5
    normalize_mean: tuple[float, float, float] = IMAGENET_MEAN
    normalize_std: tuple[float, float, float] = IMAGENET_STD

    def __post_init__(self):
        for p in (self.p_hflip, self.p_channel_permute):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probabilities must lie in [0, 1], got {p}")


def _rgb_to_tensor(arr: np.ndarray) -> torch.Tensor:
    """(H, W, 3) uint8 or float array -> (3, H, W) float32 in [0, 1]."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    t = torch.from_numpy(np.array(arr, copy=True)).permute(2, 0, 1).float()
    if arr.dtype == np.uint8:
        t = t / 255.0
    return t


def _resize_bilinear(t: torch.Tensor, hw: tuple[int, int]) -> torch.Tensor:
    return F.interpolate(t[None], size=hw, mode="bilinear", align_corners=False)[0]


def _center_crop(t: torch.Tensor, hw: tuple[int, int]) -> torch.Tensor:
    h, w = t.shape[-2:]
    th, tw = hw
    top = (h - th) // 2
    left = (w - tw) // 2
    return t[..., top:top + th, left:left + tw]


def fill_depth_nearest(depth: np.ndarray) -> tuple[np.ndarray, int]:
    """Replace nonpositive/NaN depths with the nearest valid value.

    Returns the filled map and the number of filled pixels.  Raises if the
    frame has no valid depth at all.
    """
    depth = np.asarray(depth, dtype=np.float64)
    invalid = ~(np.isfinite(depth) & (depth > 0))
    n_invalid = int(invalid.sum())
    if n_invalid == 0:
        return depth, 0
    if n_invalid == depth.size:
        raise ValueError("depth frame has no valid pixels to fill from")
    _, (ii, jj) = ndimage.distance_transform_edt(invalid, return_indices=True)
    return depth[ii, jj], n_invalid


def nyu_preprocess(rgb_raw: np.ndarray, depth_raw: np.ndarray, split: str) -> Sample:
    """640x480 indoor frame -> network-ready sample.

    Both modalities are bilinearly halved and center-cropped to 304x228.
    The train split additionally downsamples the depth to 152x114 and
    stores its reciprocal (inverse-depth target); the test split keeps the
    304x228 metric map.  Depth holes are filled from the nearest valid
    pixel and counted in sample.info["filled_pixels"].
    """
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    if rgb_raw.shape[:2] != NYU_RAW_HW or depth_raw.shape[:2] != NYU_RAW_HW:
        raise ValueError(
            f"expected 640x480 raw frames, got rgb {rgb_raw.shape} depth {depth_raw.shape}")

    depth_filled, n_filled = fill_depth_nearest(depth_raw)
    rgb = _center_crop(_resize_bilinear(_rgb_to_tensor(rgb_raw), NYU_RESIZE_HW), NYU_CROP_HW)
    depth = torch.from_numpy(depth_filled).float()[None]
    depth = _center_crop(_resize_bilinear(depth, NYU_RESIZE_HW), NYU_CROP_HW)

    if split == "train":
        depth = _resize_bilinear(depth, NYU_TRAIN_DEPTH_HW)
        depth = 1.0 / depth
        depth_space = "inverse"
    else:
        depth_space = "metric"
    mask = torch.ones_like(depth, dtype=torch.bool)
    return Sample(rgb=rgb, depth=depth, mask=mask, dataset="nyu",
                  target_space="inverse_depth", depth_space=depth_space,
                  info={"split": split, "filled_pixels": n_filled})


def kitti_preprocess(rgb_raw: np.ndarray, depth_raw: np.ndarray, split: str,
                     rng: np.random.Generator | None = None) -> Sample:
    """Driving frame with sparse LIDAR depth -> network-ready sample.

    Training: the image is reflect-padded up to 385x513 if short, randomly
    cropped to 385x513, and the depth map (zero-padded, never reflected,
    so no returns are invented) is subsampled by 2 to 193x257.  Depths
    outside (0, 80] m are masked out.  Testing keeps the full frame.
    """
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    depth_raw = np.asarray(depth_raw, dtype=np.float64)
    if not np.any(depth_raw > 0):
        raise ValueError("LIDAR frame contains no depth returns")

    rgb = _rgb_to_tensor(rgb_raw)
    depth = torch.from_numpy(depth_raw).float()[None]
    if depth.shape[-2:] != rgb.shape[-2:]:
        raise ValueError("rgb and depth frames disagree on size")

    if split == "train":
        if rng is None:
            rng = np.random.default_rng()
        ch, cw = KITTI_CROP_HW
        pad_h = max(0, ch - rgb.shape[-2])
        pad_w = max(0, cw - rgb.shape[-1])
        if pad_h or pad_w:
            rgb = F.pad(rgb[None], (0, pad_w, 0, pad_h), mode="reflect")[0]
            depth = F.pad(depth[None], (0, pad_w, 0, pad_h), mode="constant", value=0.0)[0]
        top = int(rng.integers(0, rgb.shape[-2] - ch + 1))
        left = int(rng.integers(0, rgb.shape[-1] - cw + 1))
        rgb = rgb[..., top:top + ch, left:left + cw]
        depth = depth[..., top:top + ch, left:left + cw]
        depth = depth[..., ::2, ::2]  # keeps sparsity
        assert depth.shape[-2:] == KITTI_TRAIN_DEPTH_HW

    mask = (depth > 0) & (depth <= KITTI_MAX_DEPTH)
    depth = torch.where(mask, depth, torch.zeros_like(depth))
    return Sample(rgb=rgb, depth=depth, mask=mask, dataset="kitti",
                  target_space="metric_depth", depth_space="metric",
                  info={"split": split})


def normalize_rgb(rgb: torch.Tensor, policy: AugmentationPolicy) -> torch.Tensor:
    mean = torch.tensor(policy.normalize_mean, dtype=rgb.dtype).reshape(3, 1, 1)
    std = torch.tensor(policy.normalize_std, dtype=rgb.dtype).reshape(3, 1, 1)
    return (rgb - mean) / std


def augment(sample: Sample, policy: AugmentationPolicy,
            rng: np.random.Generator) -> Sample:
    """Random horizontal flip (joint), random rgb channel permutation, then
    per-channel normalization.  Depth and mask are never renormalized."""
    rgb, depth, mask = sample.rgb, sample.depth, sample.mask
    if rng.random() < policy.p_hflip:
        rgb = torch.flip(rgb, dims=(-1,))
        depth = torch.flip(depth, dims=(-1,))
        mask = torch.flip(mask, dims=(-1,))
    if rng.random() < policy.p_channel_permute:
        perm = torch.from_numpy(rng.permutation(3))
        rgb = rgb[perm]
    rgb = normalize_rgb(rgb, policy)
    return Sample(rgb=rgb, depth=depth, mask=mask, dataset=sample.dataset,
                  target_space=sample.target_space, depth_space=sample.depth_space,
                  info=dict(sample.info))


def training_target(sample: Sample, out_hw: tuple[int, int]) -> tuple[torch.Tensor, torch.Tensor]:
    """Regression target + mask at the network's output resolution.

    Samples whose stored depth already lives in the target space at the
    right size (nyu/kitti train samples) pass through; otherwise the
    metric map is resized (bilinear when dense, nearest when sparse) and
    converted to inverse depth if that is the target space.
    """
    want_inverse = sample.target_space == "inverse_depth"
    stored_inverse = sample.depth_space == "inverse"
    if tuple(sample.depth.shape[-2:]) == tuple(out_hw) and want_inverse == stored_inverse:
        return sample.depth, sample.mask
    if stored_inverse:
        raise ValueError("cannot re-derive a target from an already-inverted depth map")

    depth = sample.depth[None]
    mask = sample.mask[None]
    dense = bool(sample.mask.all())
    if dense:
        depth = F.interpolate(depth, size=out_hw, mode="bilinear", align_corners=False)
        mask = torch.ones_like(depth, dtype=torch.bool)
    else:
        depth = F.interpolate(depth, size=out_hw, mode="nearest")
        mask = F.interpolate(mask.float(), size=out_hw, mode="nearest") > 0.5
    depth, mask = depth[0], mask[0]
    mask = mask & (depth > 0)
    if want_inverse:
        depth = torch.where(mask, 1.0 / depth.clamp(min=1e-6), torch.zeros_like(depth))
    else:
        depth = torch.where(mask, depth, torch.zeros_like(depth))
    return depth, mask


def metric_ground_truth(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    """(depth_m, mask) numpy views of the sample's ground truth in meters."""
    depth = sample.depth[0].numpy().astype(np.float64)
    mask = sample.mask[0].numpy().astype(bool)
    if sample.depth_space == "inverse":
        out = np.zeros_like(depth)
        out[mask] = 1.0 / depth[mask]
        return out, mask
    return depth, mask


def target_max_value(dataset: str) -> float:
    """Largest value the regression target can take (for SSIM constants)."""
    dmin, dmax = DEPTH_RANGES[dataset]
    return 1.0 / dmin if DATASET_TARGET_SPACE[dataset] == "inverse_depth" else dmax


def postprocess_prediction(y: torch.Tensor, sample: Sample,
                           depth_min: float | None = None,
                           depth_max: float | None = None) -> tuple[np.ndarray, int]:
    """Network output -> metric depth map at the ground-truth resolution.

    Inverse-depth outputs are clamped into the valid inverse range first
    (nonpositive values are counted in the returned tally) and inverted;
    the map is then bilinearly resized to the ground-truth size and
    clamped to the configured metric range.
    """
    dmin, dmax = DEPTH_RANGES[sample.dataset]
    depth_min = dmin if depth_min is None else depth_min
    depth_max = dmax if depth_max is None else depth_max

    y = y.detach()
    if y.dim() == 3:
        y = y[None]
    if y.dim() != 4 or y.shape[0] != 1 or y.shape[1] != 1:
        raise ValueError(f"expected a single (1, h, w) prediction, got shape {tuple(y.shape)}")

    n_clamped = int((y <= 0).sum())
    if sample.target_space == "inverse_depth":
        y = y.clamp(min=1.0 / depth_max, max=1.0 / depth_min)
        depth = 1.0 / y
    else:
        depth = y
    gt_hw = tuple(sample.depth.shape[-2:])
    if tuple(depth.shape[-2:]) != gt_hw:
        depth = F.interpolate(depth, size=gt_hw, mode="bilinear", align_corners=False)
    depth = depth.clamp(min=depth_min, max=depth_max)
    return depth[0, 0].numpy().astype(np.float64), n_clamped


def pad_to_multiple(rgb: torch.Tensor, multiple: int = 32) -> tuple[torch.Tensor, tuple[int, int]]:
    """Reflect-pad (3, H, W) on the bottom/right to a size multiple; returns
    the padded tensor and the original (H, W)."""
    h, w = rgb.shape[-2:]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h or pad_w:
        rgb = F.pad(rgb[None], (0, pad_w, 0, pad_h), mode="reflect")[0]
    return rgb, (h, w)


def load_manifest(path) -> list[tuple[str, str]]:
    """Manifest file: one 'rgb_path<TAB>depth_path' line per sample."""
    pairs = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected two tab-separated paths")
            pairs.append((parts[0], parts[1]))
    return pairs


def read_rgb(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def read_depth(path, scale: float) -> np.ndarray:
    """16-bit depth image (stored_value / scale = meters) or raw .npy floats."""
    path = os.fspath(path)
    if path.endswith(".npy"):
        return np.load(path).astype(np.float64)
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im).astype(np.float64)
    return arr / scale


def load_manifest_samples(root, dataset: str, split: str,
                          rng: np.random.Generator | None = None,
                          limit: int | None = None) -> list[Sample]:
    """Read `<root>/manifest_<split>.txt` and preprocess every listed pair."""
    if dataset not in ("nyu", "kitti"):
        raise ValueError(f"manifest loading supports nyu/kitti, got {dataset!r}")
    root = os.fspath(root)
    pairs = load_manifest(os.path.join(root, f"manifest_{split}.txt"))
    if limit is not None:
        pairs = pairs[:limit]
    samples = []
    for rgb_rel, depth_rel in pairs:
        rgb = read_rgb(os.path.join(root, rgb_rel))
        depth = read_depth(os.path.join(root, depth_rel), DEPTH_SCALES[dataset])
        if dataset == "nyu":
            samples.append(nyu_preprocess(rgb, depth, split))
        else:
            samples.append(kitti_preprocess(rgb, depth, split, rng=rng))
    return samples
