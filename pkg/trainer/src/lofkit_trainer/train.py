"""Seeded training loops for the classifier and segmenter baselines."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader

from lofkit.dataio import load_manifest

from .config import TrainConfig
from .data import ClassificationDataset, SegmentationDataset, load_split_or_fail
from .models import N_SEG_CLASSES, build_classifier, build_segmenter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainLog:
    epoch_losses: tuple[float, ...]
    per_class_iou: tuple[tuple[float, ...], ...] = ()

    def to_json(self) -> dict:
        return {
            "epoch_losses": list(self.epoch_losses),
            "per_class_iou": [list(row) for row in self.per_class_iou],
        }


def _seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def _save_checkpoint(
    model, cfg: TrainConfig, log: TrainLog, out_dir: Path, kind: str,
    hf_config: dict | None = None,
) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out_dir / f"{cfg.model}.pt"
    payload = {"kind": kind, "config": cfg.to_json(), "model_state": model.state_dict()}
    if hf_config is not None:
        payload["hf_config"] = hf_config
    torch.save(payload, checkpoint_path)
    (out_dir / f"{cfg.model}.log.json").write_text(
        json.dumps(log.to_json(), sort_keys=True, indent=2) + "\n"
    )
    return checkpoint_path


def train_classifier(
    cfg: TrainConfig,
    manifest_path: str | Path,
    split_path: str | Path,
    out_dir: str | Path,
    images_root: str | Path | None = None,
    stacks_dir: str | Path | None = None,
) -> tuple[Path, TrainLog]:
    """Train a ResNet LoF classifier on the persisted train split."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    split = load_split_or_fail(split_path)
    _seed_everything(cfg.seed)

    dataset = ClassificationDataset(
        manifest,
        split.train_ids,
        cfg.channels,
        images_root=Path(images_root) if images_root else manifest_path.parent,
        image_size=cfg.image_size,
        stacks_dir=Path(stacks_dir) if stacks_dir else None,
    )
    loader = DataLoader(dataset, batch_size=cfg.batch_size, shuffle=True,
                        generator=torch.Generator().manual_seed(cfg.seed))
    model = build_classifier(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    losses = []
    model.train()
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for inputs, labels in loader:
            optimizer.zero_grad()
            loss = F.cross_entropy(model(inputs), labels)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(labels)
            count += len(labels)
        losses.append(total / count)
        logger.info("classifier %s epoch %d/%d loss %.6f", cfg.model, epoch + 1, cfg.epochs, losses[-1])

    log = TrainLog(epoch_losses=tuple(losses))
    return _save_checkpoint(model, cfg, log, Path(out_dir), kind="classifier"), log


def _iou_from_confusion(confusion: np.ndarray) -> tuple[float, ...]:
    ious = []
    for class_id in range(N_SEG_CLASSES):
        intersection = confusion[class_id, class_id]
        union = confusion[class_id].sum() + confusion[:, class_id].sum() - intersection
        ious.append(float(intersection / union) if union > 0 else float("nan"))
    return tuple(ious)


def train_segmenter(
    cfg: TrainConfig,
    manifest_path: str | Path,
    split_path: str | Path,
    masks_dir: str | Path,
    out_dir: str | Path,
    images_root: str | Path | None = None,
    stacks_dir: str | Path | None = None,
) -> tuple[Path, TrainLog]:
    """Train the SegFormer baseline on 4-class masks from the train split."""
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    split = load_split_or_fail(split_path)
    _seed_everything(cfg.seed)

    dataset = SegmentationDataset(
        manifest,
        split.train_ids,
        cfg.channels,
        images_root=Path(images_root) if images_root else manifest_path.parent,
        masks_dir=Path(masks_dir),
        image_size=cfg.image_size,
        stacks_dir=Path(stacks_dir) if stacks_dir else None,
    )
    loader = DataLoader(dataset, batch_size=cfg.batch_size, shuffle=True,
                        generator=torch.Generator().manual_seed(cfg.seed))
    model = build_segmenter(cfg)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    losses, ious = [], []
    model.train()
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        confusion = np.zeros((N_SEG_CLASSES, N_SEG_CLASSES), dtype=np.int64)
        for inputs, targets in loader:
            optimizer.zero_grad()
            logits = model(pixel_values=inputs).logits
            logits = F.interpolate(logits, size=targets.shape[-2:], mode="bilinear",
                                   align_corners=False)
            loss = F.cross_entropy(logits, targets)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(targets)
            count += len(targets)
            predicted = logits.argmax(dim=1).reshape(-1).numpy()
            flat_targets = targets.reshape(-1).numpy()
            np.add.at(confusion, (flat_targets, predicted), 1)
        losses.append(total / count)
        ious.append(_iou_from_confusion(confusion))
        logger.info("segmenter epoch %d/%d loss %.6f iou %s",
                    epoch + 1, cfg.epochs, losses[-1], ious[-1])

    log = TrainLog(epoch_losses=tuple(losses), per_class_iou=tuple(ious))
    checkpoint = _save_checkpoint(
        model, cfg, log, Path(out_dir), kind="segmenter", hf_config=model.config.to_dict()
    )
    return checkpoint, log


def load_checkpoint(path: str | Path):
    """Rebuild the model recorded in a checkpoint; returns (model, cfg, kind)."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    cfg = TrainConfig.from_json(payload["config"])
    if payload["kind"] == "classifier":
        # same architecture regardless of init, so rebuild offline
        offline_cfg = TrainConfig(**{**cfg.to_json(), "pretrained": False})
        model = build_classifier(offline_cfg)
    else:
        from transformers import SegformerConfig, SegformerForSemanticSegmentation

        model = SegformerForSemanticSegmentation(SegformerConfig(**payload["hf_config"]))
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, cfg, payload["kind"]
