"""Dataset plumbing: manifests, splits, channel stacks, masks -> tensors."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from lofkit.dataio import DatasetManifest, ImageRecord, load_split, read_mask
from lofkit.errors import SplitError, ValidationError
from lofkit.preprocess import SIDECAR_NAME, load_channel_stack

logger = logging.getLogger(__name__)

RGB_ONLY = ("R", "G", "B")


def load_split_or_fail(split_path: str | Path):
    """Splits are made once by lofkit; training never re-splits."""
    split_path = Path(split_path)
    if not split_path.exists():
        raise SplitError(
            f"split file {split_path} does not exist; create it once with `lofkit split`"
        )
    return load_split(split_path)


def _rgb_planes(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        pixels = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return pixels.transpose(2, 0, 1)


def load_channels(
    record: ImageRecord,
    channels: tuple[str, ...],
    images_root: Path,
    stacks_dir: Path | None,
) -> np.ndarray:
    """Input planes for one record, shape (C, h, w) in [0, 1].

    Plain R,G,B comes straight from the image file; any other spec must be
    read from channel-stack exports whose sidecar order matches exactly.
    """
    if stacks_dir is not None:
        stack_path = stacks_dir / record.id
        if not (stack_path / SIDECAR_NAME).exists():
            raise ValidationError(f"no exported channel stack for {record.id} under {stacks_dir}")
        stack = load_channel_stack(stack_path)
        if stack.names != tuple(channels):
            raise ValidationError(
                f"channel spec mismatch for {record.id}: config wants {tuple(channels)}, "
                f"export has {stack.names}"
            )
        return stack.data
    if tuple(channels) != RGB_ONLY:
        raise ValidationError(
            f"channel spec {tuple(channels)} needs channel-stack exports; pass stacks_dir"
        )
    return _rgb_planes(images_root / record.path)


def _resize_channels(planes: np.ndarray, size: int) -> torch.Tensor:
    tensor = torch.from_numpy(planes).float().unsqueeze(0)
    if tensor.shape[-2:] != (size, size):
        tensor = F.interpolate(tensor, size=(size, size), mode="bilinear", align_corners=False)
    return tensor.squeeze(0)


def _resize_mask(labels: np.ndarray, size: int) -> torch.Tensor:
    tensor = torch.from_numpy(labels.astype(np.int64)).unsqueeze(0).unsqueeze(0).float()
    if tensor.shape[-2:] != (size, size):
        tensor = F.interpolate(tensor, size=(size, size), mode="nearest")
    return tensor.squeeze(0).squeeze(0).long()


class ClassificationDataset(torch.utils.data.Dataset):
    def __init__(
        self,
        manifest: DatasetManifest,
        ids: tuple[str, ...],
        channels: tuple[str, ...],
        images_root: Path,
        image_size: int,
        stacks_dir: Path | None = None,
    ):
        by_id = manifest.by_id()
        self.records = [by_id[i] for i in ids]
        self.channels = tuple(channels)
        self.images_root = Path(images_root)
        self.stacks_dir = Path(stacks_dir) if stacks_dir is not None else None
        self.image_size = image_size

    def __len__(self):
        return len(self.records)

    def __getitem__(self, index):
        record = self.records[index]
        planes = load_channels(record, self.channels, self.images_root, self.stacks_dir)
        return _resize_channels(planes, self.image_size), record.lof_label


class SegmentationDataset(torch.utils.data.Dataset):
    """Pairs input channels with 4-class masks; all-Water targets are dropped."""

    def __init__(
        self,
        manifest: DatasetManifest,
        ids: tuple[str, ...],
        channels: tuple[str, ...],
        images_root: Path,
        masks_dir: Path,
        image_size: int,
        stacks_dir: Path | None = None,
    ):
        by_id = manifest.by_id()
        self.channels = tuple(channels)
        self.images_root = Path(images_root)
        self.masks_dir = Path(masks_dir)
        self.stacks_dir = Path(stacks_dir) if stacks_dir is not None else None
        self.image_size = image_size
        self.records = []
        for record_id in ids:
            record = by_id[record_id]
            mask = read_mask(self.masks_dir / f"{record.id}.png")
            if (mask.labels == 0).all():
                logger.warning("record %s has an all-Water mask target, skipping", record.id)
                continue
            self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, index):
        record = self.records[index]
        planes = load_channels(record, self.channels, self.images_root, self.stacks_dir)
        mask = read_mask(self.masks_dir / f"{record.id}.png")
        return (
            _resize_channels(planes, self.image_size),
            _resize_mask(mask.labels, self.image_size),
        )
