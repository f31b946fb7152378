"""Classifier construction: five 2D backbones with an n-channel first layer
and a K-class head, plus checkpoint serialization."""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import torch
from torch import nn
from torchvision import models

from .errors import ChannelMismatch, UnsupportedArchitecture
from .labels import CLASS_ORDER_4, CLASS_ORDER_5, SequenceType

ARCHITECTURES = ("resnet18", "alexnet", "squeezenet1_1", "mobilenet_v2", "vgg16")

# Large plain-conv nets need a gentler rate to converge; the residual and
# lightweight backbones train at the nominal rate.
REDUCED_LR_ARCHITECTURES = frozenset({"alexnet", "vgg16"})


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "resnet18"
    in_channels: int = 4
    num_classes: int = 5
    init_seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise UnsupportedArchitecture(self.architecture)
        if not 1 <= self.in_channels <= 16:
            raise ValueError(f"in_channels must be in [1, 16], got {self.in_channels}")
        if self.num_classes not in (4, 5):
            raise ValueError(f"num_classes must be 4 or 5, got {self.num_classes}")

    @property
    def class_order(self) -> tuple[SequenceType, ...]:
        return CLASS_ORDER_5 if self.num_classes == 5 else CLASS_ORDER_4


def _replace_conv(conv: nn.Conv2d, in_channels: int) -> nn.Conv2d:
    return nn.Conv2d(
        in_channels,
        conv.out_channels,
        kernel_size=conv.kernel_size,
        stride=conv.stride,
        padding=conv.padding,
        bias=conv.bias is not None,
    )


def build_model(config: ModelConfig) -> nn.Module:
    """Build a randomly initialized classifier per the config (no pretraining)."""
    torch.manual_seed(config.init_seed)
    n, k = config.in_channels, config.num_classes

    if config.architecture == "resnet18":
        net = models.resnet18(weights=None, num_classes=k)
        net.conv1 = _replace_conv(net.conv1, n)
    elif config.architecture == "alexnet":
        net = models.alexnet(weights=None, num_classes=k)
        net.features[0] = _replace_conv(net.features[0], n)
    elif config.architecture == "squeezenet1_1":
        net = models.squeezenet1_1(weights=None, num_classes=k)
        net.features[0] = _replace_conv(net.features[0], n)
    elif config.architecture == "mobilenet_v2":
        net = models.mobilenet_v2(weights=None, num_classes=k)
        net.features[0][0] = _replace_conv(net.features[0][0], n)
    elif config.architecture == "vgg16":
        net = models.vgg16(weights=None, num_classes=k)
        net.features[0] = _replace_conv(net.features[0], n)
    else:  # unreachable, config validates
        raise UnsupportedArchitecture(config.architecture)

    return net


def first_conv(model: nn.Module) -> nn.Conv2d:
    """The model's input convolution (the layer widened to n channels)."""
    for module in model.modules():
        if isinstance(module, nn.Conv2d):
            return module
    raise ValueError("model has no Conv2d layer")


def forward_logits(model: nn.Module, batch: torch.Tensor, config: ModelConfig) -> torch.Tensor:
    """Forward pass with an explicit channel-count guard."""
    if batch.ndim != 4 or batch.shape[1] != config.in_channels:
        raise ChannelMismatch(
            f"expected Bx{config.in_channels}xHxW input, got {tuple(batch.shape)}"
        )
    return model(batch)


@dataclass
class Checkpoint:
    """Best-validation model snapshot plus the metadata to rebuild it."""

    state_dict: dict
    config: ModelConfig
    epoch: int
    val_macro_accuracy: float
    class_order: tuple[SequenceType, ...]
    manifest_hash: str | None = None

    def build(self) -> nn.Module:
        model = build_model(self.config)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    torch.save(
        {
            "state_dict": checkpoint.state_dict,
            "config": asdict(checkpoint.config),
            "epoch": checkpoint.epoch,
            "val_macro_accuracy": checkpoint.val_macro_accuracy,
            "class_order": [c.value for c in checkpoint.class_order],
            "manifest_hash": checkpoint.manifest_hash,
        },
        path,
    )


def load_checkpoint(path: str | Path) -> Checkpoint:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    return Checkpoint(
        state_dict=payload["state_dict"],
        config=ModelConfig(**payload["config"]),
        epoch=int(payload["epoch"]),
        val_macro_accuracy=float(payload["val_macro_accuracy"]),
        class_order=tuple(SequenceType(v) for v in payload["class_order"]),
        manifest_hash=payload.get("manifest_hash"),
    )
