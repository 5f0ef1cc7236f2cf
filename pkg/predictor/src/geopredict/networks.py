"""Distortion-estimation networks.

Two variants share one encoder design: three stride-2 convolutions that
gradually downsize the input, then five residual blocks. Batch
normalization and ReLU follow every convolution; all kernels are 3x3.

* The single-family network regresses its family's parameter vector with
  two further stride-2 convolutions plus a fully connected layer, squashes
  it into the family's parameter box, and emits the flow analytically
  through the differentiable model layer. Supervision is endpoint error on
  the flow, so the parameter is learned implicitly.
* The multi-family network attaches a decoder (symmetric to the encoder,
  stride-2 up-convolutions) that regresses an unconstrained flow, and a
  classification head (two stride-2 convolutions plus a fully connected
  layer) that scores the six families. The two heads share the encoder and
  are trained jointly: loss = EPE + lambda * cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .model_layers import PARAM_COUNT, TYPE_NAMES, BoundedParams, DistortionFlowLayer

ENCODER_DOWNSAMPLE = 8      # three stride-2 convolutions
HEAD_DOWNSAMPLE = 32        # plus two more in the parameter/class head


@dataclass(frozen=True)
class NetConfig:
    """Architecture and training settings.

    ``variant`` is "single" (requires ``type``) or "multi".
    ``input_size`` must be divisible by the total downsampling factor (32).
    ``class_weight`` is the trade-off multiplier on the classification loss
    in the joint objective (ignored by the single variant).
    """

    variant: str = "multi"
    type: str | None = None
    input_size: int = 256
    channels: tuple[int, int, int] = (32, 64, 128)
    residual_blocks: int = 5
    class_weight: float = 0.1
    decoder_skips: bool = False
    learning_rate: float = 1e-3
    lr_decay: float = 0.97
    batch_size: int = 16
    epochs: int = 20
    seed: int = 0
    val_fraction: float = 0.2

    def __post_init__(self):
        if self.variant not in ("single", "multi"):
            raise ValueError(f"variant must be 'single' or 'multi', got {self.variant!r}")
        if self.variant == "single" and self.type not in TYPE_NAMES:
            raise ValueError(f"single variant needs a distortion type, got {self.type!r}")
        if self.input_size % HEAD_DOWNSAMPLE != 0:
            raise ValueError(
                f"input size must be divisible by {HEAD_DOWNSAMPLE}, got {self.input_size}"
            )
        if self.class_weight < 0:
            raise ValueError(f"class_weight must be >= 0, got {self.class_weight}")

    def to_dict(self) -> dict:
        return {
            "variant": self.variant, "type": self.type,
            "input_size": self.input_size, "channels": list(self.channels),
            "residual_blocks": self.residual_blocks,
            "class_weight": self.class_weight, "decoder_skips": self.decoder_skips,
            "learning_rate": self.learning_rate, "lr_decay": self.lr_decay,
            "batch_size": self.batch_size, "epochs": self.epochs,
            "seed": self.seed, "val_fraction": self.val_fraction,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetConfig":
        doc = dict(doc)
        doc["channels"] = tuple(doc["channels"])
        return cls(**doc)


def conv_bn_relu(cin: int, cout: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(channels)
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + x)


class Encoder(nn.Module):
    """Three stride-2 convolutions then five residual blocks."""

    def __init__(self, channels: tuple[int, int, int], residual_blocks: int):
        super().__init__()
        c1, c2, c3 = channels
        self.down1 = conv_bn_relu(3, c1, stride=2)
        self.down2 = conv_bn_relu(c1, c2, stride=2)
        self.down3 = conv_bn_relu(c2, c3, stride=2)
        self.blocks = nn.Sequential(*[ResidualBlock(c3) for _ in range(residual_blocks)])

    def forward(self, x):
        f1 = self.down1(x)
        f2 = self.down2(f1)
        f3 = self.down3(f2)
        return self.blocks(f3), (f1, f2)


class VectorHead(nn.Module):
    """Two further stride-2 convolutions and a fully connected layer that
    turns the 3D feature map into a 1D vector."""

    def __init__(self, cin: int, spatial: int, out_dim: int):
        super().__init__()
        self.conv1 = conv_bn_relu(cin, cin, stride=2)
        self.conv2 = conv_bn_relu(cin, cin, stride=2)
        self.fc = nn.Linear(cin * (spatial // 4) ** 2, out_dim)

    def forward(self, x):
        x = self.conv2(self.conv1(x))
        return self.fc(x.flatten(1))


class GeoNetSingle(nn.Module):
    """Known-family network: image -> parameter vector -> analytic flow."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        c3 = config.channels[2]
        spatial = config.input_size // ENCODER_DOWNSAMPLE
        self.encoder = Encoder(config.channels, config.residual_blocks)
        self.head = VectorHead(c3, spatial, PARAM_COUNT[config.type])
        self.bound = BoundedParams(config.type)
        self.model_layer = DistortionFlowLayer(config.type, config.input_size,
                                               config.input_size)

    def predict_params(self, image: torch.Tensor) -> torch.Tensor:
        features, _ = self.encoder(image)
        return self.bound(self.head(features))

    def forward(self, image: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        rho = self.predict_params(image)
        return self.model_layer(rho), rho


class Decoder(nn.Module):
    """Mirror of the encoder: stride-2 up-convolutions back to input size,
    then a linear convolution onto the two flow channels."""

    def __init__(self, channels: tuple[int, int, int], skips: bool):
        super().__init__()
        c1, c2, c3 = channels
        self.skips = skips
        self.up1 = nn.Sequential(
            nn.ConvTranspose2d(c3, c2, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c2), nn.ReLU(inplace=True))
        self.up2 = nn.Sequential(
            nn.ConvTranspose2d(c2, c1, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c1), nn.ReLU(inplace=True))
        self.up3 = nn.Sequential(
            nn.ConvTranspose2d(c1, c1, 4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(c1), nn.ReLU(inplace=True))
        self.out = nn.Conv2d(c1, 2, 3, padding=1)

    def forward(self, x, skips):
        f1, f2 = skips
        x = self.up1(x)
        if self.skips:
            x = x + f2
        x = self.up2(x)
        if self.skips:
            x = x + f1
        return self.out(self.up3(x))


class GeoNetMulti(nn.Module):
    """Blind network: shared encoder, flow-regression decoder, and a
    six-way distortion-type classification head."""

    def __init__(self, config: NetConfig):
        super().__init__()
        self.config = config
        c3 = config.channels[2]
        spatial = config.input_size // ENCODER_DOWNSAMPLE
        self.encoder = Encoder(config.channels, config.residual_blocks)
        self.decoder = Decoder(config.channels, config.decoder_skips)
        self.classifier = VectorHead(c3, spatial, len(TYPE_NAMES))

    def forward(self, image: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        features, skips = self.encoder(image)
        flow = self.decoder(features, skips)
        scores = self.classifier(features)
        return flow, scores


def joint_loss(flow_term: torch.Tensor, class_term: torch.Tensor,
               class_weight: float) -> torch.Tensor:
    """Total objective: flow EPE plus the weighted classification loss."""
    return flow_term + class_weight * class_term


def build_network(config: NetConfig) -> nn.Module:
    return GeoNetSingle(config) if config.variant == "single" else GeoNetMulti(config)
