"""Export trained-model outputs in the lofkit interchange formats.

The classifier path emits the prediction CSV with full 6-way scores and
top-2; the segmenter path emits 4-plane probability PNGs. Both routes
construct lofkit's own record types, whose validation is the required
argmax/simplex self-check before anything is written.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from lofkit.coverage import ProbabilityRaster
from lofkit.dataio import (
    DatasetManifest,
    PredictionRecord,
    save_predictions,
    top_two,
    write_probs,
)
from lofkit.errors import ValidationError

from .data import load_channels, _resize_channels
from .train import load_checkpoint


def _select_records(manifest: DatasetManifest, ids):
    by_id = manifest.by_id()
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise ValidationError(f"ids not in manifest: {missing[:5]}")
    return [by_id[i] for i in ids]


def export_classifier_predictions(
    checkpoint_path: str | Path,
    manifest: DatasetManifest,
    ids,
    out_csv: str | Path,
    images_root: str | Path,
    stacks_dir: str | Path | None = None,
    source_model: str | None = None,
) -> list[PredictionRecord]:
    """Score images and write the prediction CSV; returns the records."""
    model, cfg, kind = load_checkpoint(checkpoint_path)
    if kind != "classifier":
        raise ValidationError(f"{checkpoint_path} is a {kind} checkpoint, not a classifier")
    records = []
    with torch.no_grad():
        for record in _select_records(manifest, ids):
            planes = load_channels(
                record, cfg.channels, Path(images_root),
                Path(stacks_dir) if stacks_dir else None,
            )
            inputs = _resize_channels(planes, cfg.image_size).unsqueeze(0)
            scores = torch.softmax(model(inputs)[0], dim=0).numpy().astype(np.float64)
            scores = tuple(float(s) for s in scores)
            top1, top2 = top_two(scores)
            records.append(
                PredictionRecord(
                    image_id=record.id,
                    top1=top1,
                    top2=top2,
                    class_scores=scores,
                    source_model=source_model or cfg.model,
                )
            )
    save_predictions(records, out_csv)
    return records


def export_segmenter_probs(
    checkpoint_path: str | Path,
    manifest: DatasetManifest,
    ids,
    out_dir: str | Path,
    images_root: str | Path,
    stacks_dir: str | Path | None = None,
) -> list[Path]:
    """Write one 4-plane probability PNG per image at the mask's resolution."""
    model, cfg, kind = load_checkpoint(checkpoint_path)
    if kind != "segmenter":
        raise ValidationError(f"{checkpoint_path} is a {kind} checkpoint, not a segmenter")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    with torch.no_grad():
        for record in _select_records(manifest, ids):
            planes = load_channels(
                record, cfg.channels, Path(images_root),
                Path(stacks_dir) if stacks_dir else None,
            )
            original_size = planes.shape[1:]
            inputs = _resize_channels(planes, cfg.image_size).unsqueeze(0)
            logits = model(pixel_values=inputs).logits
            logits = F.interpolate(logits, size=original_size, mode="bilinear",
                                   align_corners=False)
            probs = torch.softmax(logits[0], dim=0).numpy().transpose(1, 2, 0)
            raster = ProbabilityRaster(probs.astype(np.float64))
            path = out_dir / f"{record.id}.png"
            write_probs(raster, path)
            written.append(path)
    return written
