"""Mask-aware training losses for half-resolution depth regression.

Four components are combined into the training objective:

* a hard-example weighted L1 ("batch loss"): the plain masked L1 mean plus
  a softmax-of-error weighted mean that up-weights pixels with large error,
* a forward-difference gradient loss,
* a Gaussian-windowed structural-similarity loss mapped to [0, 1],
* an auxiliary L1 loss over the two side predictions.

The total is ``lambda * batch_or_l1 + grad + ssim + mu * aux``.  Every
component only ever reads pixels marked valid by the mask, so sparse
ground truth is supported throughout.
"""

from dataclasses import dataclass, replace
from typing import NamedTuple

import torch
import torch.nn.functional as F

BATCH_LOSS_SCOPES = ("per_batch", "per_image")


@dataclass(frozen=True)
class LossConfig:
    """Weights and parameters of the combined objective."""

    lambda_: float = 0.1
    mu: float = 0.1
    use_batch_loss: bool = True
    batch_loss_scope: str = "per_batch"
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    ssim_c1: float = 0.01 ** 2
    ssim_c2: float = 0.03 ** 2

    def __post_init__(self):
        if self.lambda_ < 0 or self.mu < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.ssim_window < 1 or self.ssim_window % 2 == 0:
            raise ValueError(f"ssim window must be odd and positive, got {self.ssim_window}")
        if self.batch_loss_scope not in BATCH_LOSS_SCOPES:
            raise ValueError(f"batch loss scope must be one of {BATCH_LOSS_SCOPES}")

    @classmethod
    def for_target_range(cls, max_value: float, **overrides) -> "LossConfig":
        """Stability constants scaled to the regression target's max value."""
        cfg = cls(ssim_c1=(0.01 * max_value) ** 2, ssim_c2=(0.03 * max_value) ** 2)
        return replace(cfg, **overrides) if overrides else cfg


class LossBreakdown(NamedTuple):
    total: torch.Tensor
    batch_or_l1: torch.Tensor
    grad: torch.Tensor
    ssim: torch.Tensor
    aux: torch.Tensor

    def as_floats(self) -> dict[str, float]:
        return {k: float(v.detach()) for k, v in self._asdict().items()}


def _check_shapes(mask: torch.Tensor, *tensors: torch.Tensor) -> torch.Tensor:
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise ValueError(f"shape mismatch: {tuple(t.shape)} vs {tuple(shape)}")
    if mask.shape != shape:
        raise ValueError(f"mask shape {tuple(mask.shape)} does not match {tuple(shape)}")
    return mask.bool()


def masked_l1(y: torch.Tensor, yhat: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over valid pixels."""
    mask = _check_shapes(mask, y, yhat)
    if not mask.any():
        raise ValueError("mask selects no valid pixels")
    return (y - yhat).abs()[mask].mean()


def batch_loss(y: torch.Tensor, yhat: torch.Tensor, mask: torch.Tensor,
               scope: str = "per_batch") -> torch.Tensor:
    """Hard-example weighted L1: (1/n) sum w_i e_i + (1/n) sum e_i.

    e_i = |y_i - yhat_i| over valid pixels and w_i = softmax(e)_i.  With
    scope="per_batch" the softmax normalizes over every valid pixel in the
    batch; with "per_image" it normalizes within each image and the
    per-image losses are averaged.  Always >= the plain masked L1 mean,
    with equality only when every masked error is zero.
    """
    if scope not in BATCH_LOSS_SCOPES:
        raise ValueError(f"batch loss scope must be one of {BATCH_LOSS_SCOPES}")
    mask = _check_shapes(mask, y, yhat)
    err = (y - yhat).abs()

    def weighted(e: torch.Tensor) -> torch.Tensor:
        n = e.numel()
        if n == 0:
            raise ValueError("mask selects no valid pixels")
        w = torch.softmax(e, dim=0)  # internally max-subtracted, overflow-safe
        return (w * e).sum() / n + e.mean()

    if scope == "per_batch":
        return weighted(err[mask])
    per_image = [weighted(err[b][mask[b]]) for b in range(err.shape[0])]
    return torch.stack(per_image).mean()


def grad_loss(y: torch.Tensor, yhat: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference of forward-difference image gradients.

    A horizontal (vertical) difference is counted only when both
    participating pixels are valid; each direction is averaged over its
    own counted differences and the two means are summed.  A direction
    with no countable differences contributes zero.
    """
    mask = _check_shapes(mask, y, yhat)
    if not mask.any():
        raise ValueError("mask selects no valid pixels")
    diff = y - yhat
    gx = diff[..., :, 1:] - diff[..., :, :-1]
    gy = diff[..., 1:, :] - diff[..., :-1, :]
    valid_x = mask[..., :, 1:] & mask[..., :, :-1]
    valid_y = mask[..., 1:, :] & mask[..., :-1, :]

    total = y.new_zeros(())
    for g, valid in ((gx, valid_x), (gy, valid_y)):
        if valid.any():
            total = total + g.abs()[valid].mean()
    return total


def gaussian_window(size: int, sigma: float, dtype=torch.float32, device=None) -> torch.Tensor:
    """Normalized 2-D Gaussian kernel of shape (1, 1, size, size)."""
    center = (size - 1) / 2
    coords = torch.arange(size, dtype=dtype, device=device) - center
    g = torch.exp(-(coords ** 2) / (2 * sigma ** 2))
    kernel = g[:, None] * g[None, :]
    kernel = kernel / kernel.sum()
    return kernel.reshape(1, 1, size, size)


def ssim_loss(y: torch.Tensor, yhat: torch.Tensor, mask: torch.Tensor,
              window: int = 11, sigma: float = 1.5,
              c1: float = 0.01 ** 2, c2: float = 0.03 ** 2) -> torch.Tensor:
    """(1 - mean windowed SSIM) / 2 over fully-valid windows; in [0, 1].

    Windows containing any invalid pixel are excluded from the average.
    Returns zero when no window is fully valid (e.g. very sparse masks).
    """
    mask = _check_shapes(mask, y, yhat)
    h, w = y.shape[-2:]
    if h < window or w < window:
        raise ValueError(f"image size ({h}, {w}) is smaller than the ssim window {window}")

    kernel = gaussian_window(window, sigma, dtype=y.dtype, device=y.device)
    mu_a = F.conv2d(y, kernel)
    mu_b = F.conv2d(yhat, kernel)
    var_a = F.conv2d(y * y, kernel) - mu_a ** 2
    var_b = F.conv2d(yhat * yhat, kernel) - mu_b ** 2
    cov = F.conv2d(y * yhat, kernel) - mu_a * mu_b

    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))

    ones = torch.ones_like(kernel)
    coverage = F.conv2d(mask.to(y.dtype), ones)
    full = coverage >= (window * window - 0.5)
    if not full.any():
        return y.new_zeros(())
    return (1.0 - ssim_map[full].mean()) / 2


def aux_loss(y2: torch.Tensor, y3: torch.Tensor, yhat: torch.Tensor,
             mask: torch.Tensor) -> torch.Tensor:
    """Sum of the masked L1 means of the two auxiliary predictions."""
    return masked_l1(y2, yhat, mask) + masked_l1(y3, yhat, mask)


def total_loss(output, yhat: torch.Tensor, mask: torch.Tensor,
               cfg: LossConfig = LossConfig()) -> LossBreakdown:
    """Assemble the combined objective from a network output triple.

    When cfg.use_batch_loss is false the first term is the plain masked
    L1 mean (the ablation's unweighted variant).
    """
    y, y2, y3 = output
    if cfg.use_batch_loss:
        first = batch_loss(y, yhat, mask, cfg.batch_loss_scope)
    else:
        first = masked_l1(y, yhat, mask)
    g = grad_loss(y, yhat, mask)
    s = ssim_loss(y, yhat, mask, cfg.ssim_window, cfg.ssim_sigma, cfg.ssim_c1, cfg.ssim_c2)
    a = aux_loss(y2, y3, yhat, mask)
    total = cfg.lambda_ * first + g + s + cfg.mu * a
    return LossBreakdown(total=total, batch_or_l1=first, grad=g, ssim=s, aux=a)
