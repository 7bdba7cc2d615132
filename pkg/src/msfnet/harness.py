"""Training, evaluation, ablation and visualization drivers.

Everything here is deterministic given (seed, config, data): model
initialization draws from the globally seeded torch RNG, while data order
and per-sample augmentation draw from numpy generators keyed on
(seed, epoch) and (seed, epoch, sample index), so runs are reproducible
and all network variants see identical batch sequences.
"""

import csv
import math
import os
import tempfile
from dataclasses import dataclass, replace

import numpy as np
import torch

from .data import (AugmentationPolicy, Sample, augment, metric_ground_truth,
                   normalize_rgb, pad_to_multiple, postprocess_prediction,
                   target_max_value, training_target)
from .losses import LossConfig, total_loss
from .metrics import CSV_HEADER, MetricReport, aggregate, evaluate_image
from .network import (VARIANT_LADDER, EncoderSpec, MSFNet, NetworkVariant,
                      load_checkpoint, save_checkpoint)

ITER_LOG_HEADER = ("epoch", "iteration", "lr", "total", "batch_or_l1", "grad", "ssim", "aux")

# First-term/auxiliary loss weights by dataset when the config leaves them unset.
LAMBDA_MU_DEFAULTS = {"nyu": 0.1, "kitti": 1.0, "synthetic": 1.0}


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 1e-4
    lr_decay_factor: float = 0.95
    lr_decay_every: int = 5
    weight_decay: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    batch_size: int = 8
    epochs: int = 10
    lambda_: float | None = None  # None -> per-dataset default
    mu: float | None = None
    batch_loss_scope: str = "per_batch"
    p_hflip: float = 0.5
    p_channel_permute: float = 0.5
    seed: int = 0
    checkpoint_every: int = 1
    usf_width: int = 16
    encoder_channels: tuple[int, ...] = (16, 32, 64, 128, 256)

    def __post_init__(self):
        if self.lr0 <= 0 or self.lr_decay_factor <= 0 or self.weight_decay < 0:
            raise ValueError("rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epoch count must be >= 0")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint cadence must be >= 1")


@dataclass
class TrainResult:
    model: MSFNet
    checkpoint_path: str
    iter_log_path: str
    epoch_log_path: str
    out_dir: str


@dataclass
class AblationRow:
    name: str
    report: MetricReport


def learning_rate(config: TrainConfig, epoch: int) -> float:
    """Step schedule: lr0 * factor^floor(epoch / every)."""
    return config.lr0 * config.lr_decay_factor ** (epoch // config.lr_decay_every)


def loss_config_for(dataset: str, config: TrainConfig) -> LossConfig:
    default = LAMBDA_MU_DEFAULTS[dataset]
    lam = config.lambda_ if config.lambda_ is not None else default
    mu = config.mu if config.mu is not None else default
    return LossConfig.for_target_range(
        target_max_value(dataset), lambda_=lam, mu=mu,
        batch_loss_scope=config.batch_loss_scope)


def _half_hw(hw: tuple[int, int]) -> tuple[int, int]:
    return ((hw[0] + 1) // 2, (hw[1] + 1) // 2)


def _prepare_batch(samples: list[Sample], policy: AugmentationPolicy,
                   seed: int, epoch: int, indices: list[int],
                   train_mode: bool) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, tuple[int, int]]:
    """Stack a batch: augmented (train) or normalized-only (eval) images,
    padded to a multiple of 32, plus half-resolution targets and masks."""
    images, targets, masks = [], [], []
    orig_hw = tuple(samples[indices[0]].rgb.shape[-2:])
    out_hw = _half_hw(orig_hw)
    for idx in indices:
        s = samples[idx]
        if tuple(s.rgb.shape[-2:]) != orig_hw:
            raise ValueError("all samples in a batch must share the same image size")
        if train_mode:
            s = augment(s, policy, np.random.default_rng([seed, epoch, idx]))
        else:
            s = replace_rgb(s, normalize_rgb(s.rgb, policy))
        target, mask = training_target(s, out_hw)
        padded, _ = pad_to_multiple(s.rgb)
        images.append(padded)
        targets.append(target)
        masks.append(mask)
    return torch.stack(images), torch.stack(targets), torch.stack(masks), out_hw


def replace_rgb(sample: Sample, rgb: torch.Tensor) -> Sample:
    return Sample(rgb=rgb, depth=sample.depth, mask=sample.mask, dataset=sample.dataset,
                  target_space=sample.target_space, depth_space=sample.depth_space,
                  info=dict(sample.info))


def _forward_half(model: MSFNet, images: torch.Tensor, out_hw: tuple[int, int]):
    """Run the network and crop each output to the unpadded half size."""
    out = model(images)
    h2, w2 = out_hw
    return type(out)(*(t[..., :h2, :w2] for t in out))


def train(config: TrainConfig, variant: NetworkVariant, dataset: list[Sample],
          val_dataset: list[Sample] | None = None, out_dir: str | None = None) -> TrainResult:
    """Adam training loop with the step lr schedule and CSV logging.

    Writes a per-iteration loss log, a per-epoch validation metric log
    (when a validation set is given), epoch checkpoints at the configured
    cadence plus a rolling `checkpoint.pt`, and `checkpoint_best.pt` for
    the best validation REL.  Aborts with a diagnostic batch dump if the
    loss goes non-finite.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    if out_dir is None:
        out_dir = tempfile.mkdtemp(prefix="msfnet_train_")
    os.makedirs(out_dir, exist_ok=True)

    torch.manual_seed(config.seed)
    model = MSFNet(variant,
                   EncoderSpec(kind="toy", stage_channels=tuple(config.encoder_channels)),
                   usf_width=config.usf_width)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr0,
                                 betas=(config.adam_beta1, config.adam_beta2),
                                 weight_decay=config.weight_decay)
    policy = AugmentationPolicy(p_hflip=config.p_hflip,
                                p_channel_permute=config.p_channel_permute)
    loss_cfg = replace(loss_config_for(dataset[0].dataset, config),
                       use_batch_loss=variant.use_batch_loss)

    iter_log_path = os.path.join(out_dir, "train_log.csv")
    epoch_log_path = os.path.join(out_dir, "epoch_log.csv")
    checkpoint_path = os.path.join(out_dir, "checkpoint.pt")
    best_rel = math.inf

    with open(iter_log_path, "w", newline="") as iter_fh, \
            open(epoch_log_path, "w", newline="") as epoch_fh:
        iter_csv = csv.writer(iter_fh)
        iter_csv.writerow(ITER_LOG_HEADER)
        epoch_csv = csv.writer(epoch_fh)
        epoch_csv.writerow(("epoch",) + CSV_HEADER)

        save_checkpoint(checkpoint_path, model, optimizer, epoch=0)
        iteration = 0
        for epoch in range(config.epochs):
            lr = learning_rate(config, epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr
            model.train()
            order = np.random.default_rng([config.seed, epoch]).permutation(len(dataset))
            for start in range(0, len(dataset), config.batch_size):
                indices = [int(i) for i in order[start:start + config.batch_size]]
                images, targets, masks, out_hw = _prepare_batch(
                    dataset, policy, config.seed, epoch, indices, train_mode=True)
                optimizer.zero_grad()
                output = _forward_half(model, images, out_hw)
                breakdown = total_loss(output, targets, masks, loss_cfg)
                values = breakdown.as_floats()
                if not all(math.isfinite(v) for v in values.values()):
                    dump = os.path.join(out_dir, "nonfinite_batch.pt")
                    torch.save({"epoch": epoch, "iteration": iteration,
                                "indices": indices, "images": images,
                                "targets": targets, "masks": masks,
                                "loss": values}, dump)
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch} iteration {iteration}; "
                        f"offending batch dumped to {dump}")
                breakdown.total.backward()
                optimizer.step()
                iter_csv.writerow([epoch, iteration, f"{lr:.10g}"] +
                                  [f"{values[k]:.10g}" for k in
                                   ("total", "batch_or_l1", "grad", "ssim", "aux")])
                iteration += 1

            if (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(os.path.join(out_dir, f"checkpoint_epoch{epoch:03d}.pt"),
                                model, optimizer, epoch=epoch + 1)
            save_checkpoint(checkpoint_path, model, optimizer, epoch=epoch + 1)
            if val_dataset:
                report = evaluate(model, val_dataset)
                epoch_csv.writerow((epoch,) + report.csv_row())
                if report.rel < best_rel:
                    best_rel = report.rel
                    save_checkpoint(os.path.join(out_dir, "checkpoint_best.pt"),
                                    model, optimizer, epoch=epoch + 1)

    return TrainResult(model=model, checkpoint_path=checkpoint_path,
                       iter_log_path=iter_log_path, epoch_log_path=epoch_log_path,
                       out_dir=out_dir)


def _resolve_model(checkpoint_or_model, expected_variant: NetworkVariant | None = None) -> MSFNet:
    if isinstance(checkpoint_or_model, MSFNet):
        model = checkpoint_or_model
    else:
        model, _ = load_checkpoint(checkpoint_or_model)
    if expected_variant is not None and model.variant != expected_variant:
        raise ValueError(
            f"checkpoint variant {model.variant} does not match requested {expected_variant}")
    return model


def predict_depth(model: MSFNet, sample: Sample,
                  policy: AugmentationPolicy = AugmentationPolicy()) -> tuple[np.ndarray, int]:
    """Normalized forward pass + postprocessing to a metric depth map."""
    model.eval()
    with torch.no_grad():
        rgb = normalize_rgb(sample.rgb, policy)
        padded, orig_hw = pad_to_multiple(rgb)
        out = model(padded[None])
        h2, w2 = _half_hw(orig_hw)
        y = out.y[0, :, :h2, :w2]
    return postprocess_prediction(y, sample)


def evaluate(checkpoint_or_model, dataset: list[Sample], csv_path: str | None = None,
             inject_oracle: bool = False,
             expected_variant: NetworkVariant | None = None) -> MetricReport:
    """Per-image metrics aggregated over a dataset.

    With inject_oracle=True the ground truth is evaluated as if it were
    the prediction (a plumbing check that must yield zero errors).
    """
    if not dataset:
        raise ValueError("evaluation dataset is empty")
    model = None if inject_oracle else _resolve_model(checkpoint_or_model, expected_variant)
    reports = []
    for sample in dataset:
        gt, gmask = metric_ground_truth(sample)
        if inject_oracle:
            pred = gt
        else:
            pred, _ = predict_depth(model, sample)
        reports.append(evaluate_image(pred, gt, gmask))
    report = aggregate(reports)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            writer.writerow(report.csv_row())
    return report


def ablate(config: TrainConfig, dataset: list[Sample],
           eval_dataset: list[Sample] | None = None,
           out_dir: str | None = None) -> tuple[list[AblationRow], str]:
    """Train and evaluate the five-variant ladder under one seed.

    Every variant reuses the same config and data, and the data order is a
    pure function of (seed, epoch), so all runs see identical batch
    sequences.  Evaluation defaults to the training set when no held-out
    set is given.  Returns the rows plus a formatted six-metric table.
    """
    if out_dir is None:
        out_dir = tempfile.mkdtemp(prefix="msfnet_ablate_")
    eval_dataset = eval_dataset if eval_dataset is not None else dataset
    rows = []
    for name, variant in VARIANT_LADDER:
        run_dir = os.path.join(out_dir, name.replace("+", "_").replace("-", "_"))
        result = train(config, variant, dataset, out_dir=run_dir)
        report = evaluate(result.model, eval_dataset)
        rows.append(AblationRow(name=name, report=report))
    table = format_ablation_table(rows)
    with open(os.path.join(out_dir, "ablation.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("method",) + CSV_HEADER)
        for row in rows:
            writer.writerow((row.name,) + row.report.csv_row())
    with open(os.path.join(out_dir, "ablation.txt"), "w") as fh:
        fh.write(table + "\n")
    return rows, table


def format_ablation_table(rows: list[AblationRow]) -> str:
    header = f"{'method':<30s} {'REL':>7s} {'RMSE':>7s} {'log10':>7s} " \
             f"{'d<1.25':>7s} {'d<1.25^2':>9s} {'d<1.25^3':>9s}"
    lines = [header, "-" * len(header)]
    for row in rows:
        r = row.report
        lines.append(f"{row.name:<30s} {r.rel:>7.3f} {r.rmse:>7.3f} {r.log10:>7.3f} "
                     f"{r.delta1:>7.3f} {r.delta2:>9.3f} {r.delta3:>9.3f}")
    return "\n".join(lines)


# --- visualization ---------------------------------------------------------

INVALID_COLOR = (255, 0, 255)  # sentinel for masked-out pixels


def colorize(values: np.ndarray, vmin: float, vmax: float,
             mask: np.ndarray | None = None, cmap: str = "viridis") -> np.ndarray:
    """Map a 2-D array to uint8 RGB with a fixed value range; invalid
    pixels get the sentinel color."""
    from matplotlib import colormaps

    span = vmax - vmin
    norm = np.clip((values - vmin) / span, 0.0, 1.0) if span > 0 else np.zeros_like(values)
    rgba = colormaps[cmap](norm)
    rgb = (rgba[..., :3] * 255).round().astype(np.uint8)
    if mask is not None:
        rgb[~mask] = INVALID_COLOR
    return rgb


def visualize(checkpoint_or_model, dataset: list[Sample], out_dir) -> list[str]:
    """Write per-sample panels (rgb / gt depth / predicted depth / abs error)
    and a contact sheet.  Ground truth and prediction share one color range.
    Returns the written file paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from PIL import Image

    model = _resolve_model(checkpoint_or_model)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    panel_rows = []
    for i, sample in enumerate(dataset):
        gt, gmask = metric_ground_truth(sample)
        pred, _ = predict_depth(model, sample)
        vmin = float(min(gt[gmask].min(), pred.min()))
        vmax = float(max(gt[gmask].max(), pred.max()))
        err = np.abs(pred - gt)
        err_max = float(err[gmask].max()) if gmask.any() else 0.0

        rgb = (sample.rgb.permute(1, 2, 0).numpy() * 255).round().astype(np.uint8)
        gt_img = colorize(gt, vmin, vmax, gmask)
        pred_img = colorize(pred, vmin, vmax)
        err_img = colorize(err, 0.0, err_max if err_max > 0 else 1.0, gmask, cmap="magma")

        for suffix, arr in (("rgb", rgb), ("gt", gt_img), ("pred", pred_img), ("err", err_img)):
            path = os.path.join(out_dir, f"sample{i:03d}_{suffix}.png")
            Image.fromarray(arr).save(path)
            written.append(path)
        panel_rows.append((rgb, gt_img, pred_img, err_img))

    n = len(panel_rows)
    fig, axes = plt.subplots(n, 4, figsize=(10, 2.6 * n), squeeze=False)
    titles = ("input", "ground truth", "prediction", "|error|")
    for r, panels in enumerate(panel_rows):
        for c, arr in enumerate(panels):
            axes[r][c].imshow(arr)
            axes[r][c].set_axis_off()
            if r == 0:
                axes[r][c].set_title(titles[c])
    sheet = os.path.join(out_dir, "contact_sheet.png")
    fig.tight_layout()
    fig.savefig(sheet, dpi=110)
    plt.close(fig)
    written.append(sheet)
    return written
