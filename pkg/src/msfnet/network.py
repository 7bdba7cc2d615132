"""Depth-estimation network: pluggable 5-stage encoder, skip-connected
decoder, optional spatial attention between stages 3 and 4, optional
multi-stage fusion, and auxiliary prediction heads.

The network maps a (B, 3, H, W) image with H, W divisible by 32 to three
(B, 1, H/2, W/2) predictions: the main output y and two auxiliary outputs
y2 (attention path) and y3 (fusion path).  When a path is disabled its
auxiliary output is a detached copy of y, so downstream loss code is
uniform across variants.
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import SpatialGate
from .fusion import LEAKY_SLOPE, USFModule

CHECKPOINT_FORMAT_VERSION = 1

ATTENTION_KINDS = ("none", "cbam_s", "eda")


def leaky_relu(x, alpha: float = 0.2):
    """Piecewise-linear activation: x for x > 0, alpha * x otherwise."""
    if isinstance(x, torch.Tensor):
        return F.leaky_relu(x, alpha)
    return x if x > 0 else alpha * x


@dataclass(frozen=True)
class EncoderSpec:
    """Describes a 5-stage encoder; stage s halves the input 2^(s+1) times."""

    kind: str = "toy"
    stage_channels: tuple[int, ...] = (16, 32, 64, 128, 256)
    stem: str = "3x3 stride-2 conv + leaky relu per stage"

    def __post_init__(self):
        if len(self.stage_channels) != 5:
            raise ValueError(f"encoder needs exactly 5 stages, got {len(self.stage_channels)}")
        if any(c < 1 for c in self.stage_channels):
            raise ValueError(f"stage channel counts must be positive: {self.stage_channels}")


@dataclass(frozen=True)
class NetworkVariant:
    """Which optional modules are active.  Attention requires the fusion path."""

    use_usf: bool = True
    attention: str = "eda"
    use_batch_loss: bool = True

    def __post_init__(self):
        if self.attention not in ATTENTION_KINDS:
            raise ValueError(f"attention must be one of {ATTENTION_KINDS}, got {self.attention!r}")
        if self.attention != "none" and not self.use_usf:
            raise ValueError("attention without the fusion module is not a supported variant")


VARIANT_LADDER: tuple[tuple[str, NetworkVariant], ...] = (
    ("baseline", NetworkVariant(use_usf=False, attention="none", use_batch_loss=False)),
    ("baseline+USF", NetworkVariant(use_usf=True, attention="none", use_batch_loss=False)),
    ("baseline+USF+CBAM-S", NetworkVariant(use_usf=True, attention="cbam_s", use_batch_loss=False)),
    ("baseline+USF+EDA", NetworkVariant(use_usf=True, attention="eda", use_batch_loss=False)),
    ("baseline+USF+EDA+batch-loss", NetworkVariant(use_usf=True, attention="eda", use_batch_loss=True)),
)


class NetworkOutput(NamedTuple):
    y: torch.Tensor   # main prediction, (B, 1, H/2, W/2)
    y2: torch.Tensor  # attention-path prediction, same shape
    y3: torch.Tensor  # fusion-path prediction, same shape


def _conv_block(in_ch: int, out_ch: int) -> nn.Sequential:
    conv = nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1)
    nn.init.xavier_uniform_(conv.weight)
    nn.init.zeros_(conv.bias)
    return nn.Sequential(conv, nn.LeakyReLU(LEAKY_SLOPE))


class ToyEncoder(nn.Module):
    """Five stride-2 conv blocks; stage s output is 1/2^(s+1) resolution."""

    def __init__(self, stage_channels: Sequence[int] = (16, 32, 64, 128, 256)):
        super().__init__()
        if len(stage_channels) != 5:
            raise ValueError(f"encoder needs exactly 5 stages, got {len(stage_channels)}")
        self.stage_channels = tuple(stage_channels)
        blocks = []
        prev = 3
        for ch in stage_channels:
            conv = nn.Conv2d(prev, ch, kernel_size=3, stride=2, padding=1)
            nn.init.xavier_uniform_(conv.weight)
            nn.init.zeros_(conv.bias)
            blocks.append(nn.Sequential(conv, nn.LeakyReLU(LEAKY_SLOPE)))
            prev = ch
        self.blocks = nn.ModuleList(blocks)

    def forward(self, image: torch.Tensor) -> list[torch.Tensor]:
        _check_input_size(image)
        feats = []
        x = image
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        return feats


ENCODER_FACTORIES: dict[str, Callable[[EncoderSpec], nn.Module]] = {
    "toy": lambda spec: ToyEncoder(spec.stage_channels),
}


def register_encoder(kind: str, factory: Callable[[EncoderSpec], nn.Module]) -> None:
    """Register an external encoder backbone (e.g. a pretrained hook).

    The factory must return a module with `blocks` (5 stride-2 stages)
    and `stage_channels` attributes matching :class:`ToyEncoder`.
    """
    ENCODER_FACTORIES[kind] = factory


def build_encoder(spec: EncoderSpec) -> nn.Module:
    try:
        factory = ENCODER_FACTORIES[spec.kind]
    except KeyError:
        raise KeyError(
            f"no encoder factory registered for kind {spec.kind!r}; "
            f"register one with register_encoder() (known: {sorted(ENCODER_FACTORIES)})"
        ) from None
    return factory(spec)


def _check_input_size(image: torch.Tensor) -> None:
    if image.dim() != 4 or image.shape[1] != 3:
        raise ValueError(f"expected a (B, 3, H, W) image tensor, got shape {tuple(image.shape)}")
    h, w = image.shape[-2:]
    if h % 32 != 0 or w % 32 != 0:
        raise ValueError(f"input size ({h}, {w}) must be divisible by 32")


class MSFNet(nn.Module):
    """Encoder-decoder depth network with optional attention and fusion.

    The decoder runs four (2x bilinear upsample, concat skip, conv block)
    steps from the coarsest stage up to half resolution, with channel
    widths halving per step.  The fusion output joins the decoder at half
    resolution before the final merge block; all heads are linear 1x1
    convolutions.
    """

    def __init__(self, variant: NetworkVariant = NetworkVariant(),
                 encoder_spec: EncoderSpec = EncoderSpec(),
                 usf_width: int = 16, usf_out_channels: int | None = None,
                 encoder: nn.Module | None = None):
        super().__init__()
        self.variant = variant
        self.encoder_spec = encoder_spec
        self.net_config = {"usf_width": usf_width, "usf_out_channels": usf_out_channels}
        self.encoder = encoder if encoder is not None else build_encoder(encoder_spec)
        ch = tuple(self.encoder.stage_channels)

        self.gate = SpatialGate(variant.attention) if variant.attention != "none" else None
        self.usf = USFModule(ch, width=usf_width, out_channels=usf_out_channels) if variant.use_usf else None

        widths = []
        prev = ch[4]
        for _ in range(4):
            prev = max(prev // 2, 4)
            widths.append(prev)
        skips = [ch[3], ch[2], ch[1], ch[0]]
        steps = []
        prev = ch[4]
        for width, skip in zip(widths, skips):
            steps.append(_conv_block(prev + skip, width))
            prev = width
        self.decoder = nn.ModuleList(steps)

        merge_in = widths[-1] + (self.usf.out_channels if self.usf is not None else 0)
        self.merge = _conv_block(merge_in, widths[-1])

        self.head = nn.Conv2d(widths[-1], 1, kernel_size=1)
        nn.init.xavier_uniform_(self.head.weight)
        nn.init.zeros_(self.head.bias)
        if self.gate is not None:
            self.att_head = nn.Conv2d(ch[3], 1, kernel_size=1)
            nn.init.xavier_uniform_(self.att_head.weight)
            nn.init.zeros_(self.att_head.bias)
        if self.usf is not None:
            self.usf_head = nn.Conv2d(self.usf.out_channels, 1, kernel_size=1)
            nn.init.xavier_uniform_(self.usf_head.weight)
            nn.init.zeros_(self.usf_head.bias)

    def forward(self, image: torch.Tensor) -> NetworkOutput:
        _check_input_size(image)
        h, w = image.shape[-2:]

        feats = []
        raw_stage3 = None
        x = image
        for s, block in enumerate(self.encoder.blocks):
            x = block(x)
            if s == 3:
                raw_stage3 = x
                if self.gate is not None:
                    x = self.gate(x)
            feats.append(x)
        # feats[3] carries the attended map when the gate is enabled; the
        # decoder skip keeps the raw stage-3 output.
        skips = [raw_stage3, feats[2], feats[1], feats[0]]

        z = feats[4]
        for step, skip in zip(self.decoder, skips):
            z = F.interpolate(z, scale_factor=2, mode="bilinear", align_corners=False)
            z = step(torch.cat([z, skip], dim=1))

        fused = self.usf(feats) if self.usf is not None else None
        if fused is not None:
            z = torch.cat([z, fused], dim=1)
        z = self.merge(z)
        y = self.head(z)

        half = (h // 2, w // 2)
        if self.gate is not None:
            y2 = F.interpolate(self.att_head(feats[3]), size=half, mode="bilinear", align_corners=False)
        else:
            y2 = y.detach().clone()
        if fused is not None:
            y3 = self.usf_head(fused)
        else:
            y3 = y.detach().clone()
        return NetworkOutput(y=y, y2=y2, y3=y3)


def save_checkpoint(path, model: MSFNet, optimizer=None, epoch: int = 0) -> None:
    """Write a versioned key->tensor archive (see README for the schema)."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "variant": {
            "use_usf": model.variant.use_usf,
            "attention": model.variant.attention,
            "use_batch_loss": model.variant.use_batch_loss,
        },
        "encoder_spec": {
            "kind": model.encoder_spec.kind,
            "stage_channels": tuple(model.encoder_spec.stage_channels),
            "stem": model.encoder_spec.stem,
        },
        "net_config": dict(model.net_config),
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "epoch": epoch,
    }
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[MSFNet, dict]:
    """Rebuild the network from a checkpoint; returns (model, payload)."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    variant = NetworkVariant(**payload["variant"])
    spec = EncoderSpec(
        kind=payload["encoder_spec"]["kind"],
        stage_channels=tuple(payload["encoder_spec"]["stage_channels"]),
        stem=payload["encoder_spec"]["stem"],
    )
    model = MSFNet(variant, spec, **payload["net_config"])
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, payload
