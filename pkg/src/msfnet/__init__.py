"""Multi-scale feature-fusion depth estimation toolkit."""

from .attention import PooledMaps, SpatialGate, cbam_s_forward, channel_pool, eda_forward
from .fusion import (RDRBlock, USFModule, UpBlock, adaptive_pool,
                     subpixel_downsample, subpixel_upsample)
from .losses import (LossBreakdown, LossConfig, aux_loss, batch_loss, grad_loss,
                     masked_l1, ssim_loss, total_loss)
from .metrics import ImageMetrics, MetricReport, aggregate, evaluate_image, write_report_csv
from .network import (VARIANT_LADDER, EncoderSpec, MSFNet, NetworkOutput, NetworkVariant,
                      ToyEncoder, build_encoder, leaky_relu, load_checkpoint,
                      register_encoder, save_checkpoint)
from .data import (AugmentationPolicy, Sample, augment, kitti_preprocess,
                   metric_ground_truth, normalize_rgb, nyu_preprocess,
                   pad_to_multiple, postprocess_prediction, training_target)
from .synth import render_scene, synth_generate
from .harness import (AblationRow, TrainConfig, TrainResult, ablate, evaluate,
                      format_ablation_table, learning_rate, predict_depth, train,
                      visualize)

__version__ = "0.1.0"

__all__ = [
    "AblationRow", "AugmentationPolicy", "EncoderSpec", "ImageMetrics", "LossBreakdown",
    "LossConfig", "MSFNet", "MetricReport", "NetworkOutput", "NetworkVariant", "PooledMaps",
    "RDRBlock", "Sample", "SpatialGate", "ToyEncoder", "TrainConfig", "TrainResult",
    "USFModule", "UpBlock", "VARIANT_LADDER", "ablate", "adaptive_pool", "aggregate",
    "augment", "aux_loss", "batch_loss", "build_encoder", "cbam_s_forward", "channel_pool",
    "eda_forward", "evaluate", "evaluate_image", "format_ablation_table", "grad_loss",
    "kitti_preprocess", "leaky_relu", "learning_rate", "load_checkpoint", "masked_l1",
    "metric_ground_truth", "normalize_rgb", "nyu_preprocess", "pad_to_multiple",
    "postprocess_prediction", "predict_depth", "register_encoder", "render_scene",
    "save_checkpoint", "ssim_loss", "subpixel_downsample", "subpixel_upsample",
    "synth_generate", "total_loss", "train", "training_target", "visualize",
    "write_report_csv",
]
