"""Standard depth-estimation evaluation metrics.

Per image: RMSE, mean absolute relative error (REL), mean absolute log10
error, and the three threshold accuracies delta_k = fraction of pixels
with max(pred/gt, gt/pred) < 1.25^k.  Reports aggregate as unweighted
per-image means.
"""

import csv
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

CSV_HEADER = ("rel", "rmse", "log10", "delta1", "delta2", "delta3", "n_images", "n_pixels")


class ImageMetrics(NamedTuple):
    rmse: float
    rel: float
    log10: float
    delta1: float
    delta2: float
    delta3: float
    n_pixels: int


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    rel: float
    log10: float
    delta1: float
    delta2: float
    delta3: float
    n_pixels: int
    n_images: int

    def csv_row(self) -> tuple:
        return (self.rel, self.rmse, self.log10, self.delta1, self.delta2,
                self.delta3, self.n_images, self.n_pixels)


def evaluate_image(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> ImageMetrics:
    """Metrics for one image over valid pixels; depths must be positive there.

    pred and gt are metric depth maps of identical shape; mask marks the
    pixels that participate.  Threshold accuracies use a strict '<'.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != gt.shape or mask.shape != pred.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.shape}, gt {gt.shape}, mask {mask.shape}")
    if not mask.any():
        raise ValueError("mask selects no valid pixels")
    p = pred[mask]
    g = gt[mask]
    if np.any(p <= 0) or np.any(g <= 0):
        raise ValueError("depth values must be strictly positive on the mask")

    diff = p - g
    rmse = float(np.sqrt(np.mean(diff ** 2)))
    rel = float(np.mean(np.abs(diff) / g))
    log10 = float(np.mean(np.abs(np.log10(p) - np.log10(g))))
    ratio = np.maximum(p / g, g / p)
    deltas = [float(np.mean(ratio < 1.25 ** k)) for k in (1, 2, 3)]
    return ImageMetrics(rmse=rmse, rel=rel, log10=log10,
                        delta1=deltas[0], delta2=deltas[1], delta3=deltas[2],
                        n_pixels=int(p.size))


def aggregate(reports: Sequence[ImageMetrics]) -> MetricReport:
    """Unweighted per-image mean of each metric."""
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    arr = np.array([r[:6] for r in reports], dtype=np.float64)
    means = arr.mean(axis=0)
    return MetricReport(rmse=float(means[0]), rel=float(means[1]), log10=float(means[2]),
                        delta1=float(means[3]), delta2=float(means[4]), delta3=float(means[5]),
                        n_pixels=int(sum(r.n_pixels for r in reports)),
                        n_images=len(reports))


def write_report_csv(path, report: MetricReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerow(report.csv_row())
