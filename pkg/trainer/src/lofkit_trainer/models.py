"""Model construction, including first-layer widening for extra channels."""

from __future__ import annotations

import torch
from torch import nn

from lofkit.errors import ValidationError

from .config import TrainConfig

N_LOF_CLASSES = 6
N_SEG_CLASSES = 4

SEGFORMER_PRETRAINED_ID = "nvidia/mit-b0"


def _widen_conv(conv: nn.Conv2d, in_channels: int) -> nn.Conv2d:
    """Replace a conv's input width, seeding extra channels from the RGB mean."""
    widened = nn.Conv2d(
        in_channels,
        conv.out_channels,
        kernel_size=conv.kernel_size,
        stride=conv.stride,
        padding=conv.padding,
        bias=conv.bias is not None,
    )
    with torch.no_grad():
        copy = min(conv.in_channels, in_channels)
        widened.weight[:, :copy] = conv.weight[:, :copy]
        if in_channels > conv.in_channels:
            mean = conv.weight.mean(dim=1, keepdim=True)
            widened.weight[:, conv.in_channels :] = mean
        if conv.bias is not None:
            widened.bias.copy_(conv.bias)
    return widened


def build_classifier(cfg: TrainConfig) -> nn.Module:
    from torchvision import models

    in_channels = len(cfg.channels)
    if cfg.model == "resnet18":
        weights = models.ResNet18_Weights.IMAGENET1K_V1 if cfg.pretrained else None
        model = models.resnet18(weights=weights)
    elif cfg.model == "resnet50":
        weights = models.ResNet50_Weights.IMAGENET1K_V1 if cfg.pretrained else None
        model = models.resnet50(weights=weights)
    else:
        raise ValidationError(f"{cfg.model!r} is not a classifier model")
    if in_channels != 3:
        model.conv1 = _widen_conv(model.conv1, in_channels)
    model.fc = nn.Linear(model.fc.in_features, N_LOF_CLASSES)
    return model


def build_segmenter(cfg: TrainConfig) -> nn.Module:
    from transformers import SegformerConfig, SegformerForSemanticSegmentation

    if cfg.model != "segformer":
        raise ValidationError(f"{cfg.model!r} is not a segmentation model")
    in_channels = len(cfg.channels)
    if cfg.pretrained:
        # needs network access the first time; offline runs use pretrained=False
        return SegformerForSemanticSegmentation.from_pretrained(
            SEGFORMER_PRETRAINED_ID,
            num_labels=N_SEG_CLASSES,
            num_channels=in_channels,
            ignore_mismatched_sizes=True,
        )
    config = SegformerConfig(
        num_channels=in_channels,
        num_labels=N_SEG_CLASSES,
        hidden_sizes=[16, 32, 64, 96],
        depths=[1, 1, 1, 1],
        num_attention_heads=[1, 2, 4, 8],
        decoder_hidden_size=64,
    )
    return SegformerForSemanticSegmentation(config)
