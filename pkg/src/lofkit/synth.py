"""Synthetic masks, videos, and datasets with pixel-exact ground truth.

Class pixel counts are chosen by integer counting, never by sampling, so
threshold-boundary tests (5.0%, 16.0%, 40.0% cover) stay deterministic.
Blob placement grows each region from seeded centers via jittered distance
fields; shapes are blobby but make no claim to realism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .coverage import CoverageReport, MaskRaster, ProbabilityRaster, SegClass
from .dataio import (
    DatasetManifest,
    ImageRecord,
    Media,
    render_mask_rgb,
    save_manifest,
    write_mask,
)
from .errors import ValidationError
from .rules import FIGURE1_DEFAULT, FoulingObservation, ThresholdConfig, classify_lof
from .temporal import FrameSequence


@dataclass(frozen=True)
class SynthSpec:
    """Targets for one synthetic mask; slime/macro are percent of hull area."""

    width: int
    height: int
    slime_pct: float = 0.0
    macro_pct: float = 0.0
    water_fraction: float = 0.3
    blob_count: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError(f"mask size must be positive, got {self.width}x{self.height}")
        if not 0.0 <= self.water_fraction < 1.0:
            raise ValidationError(f"water_fraction must be in [0, 1), got {self.water_fraction!r}")
        if self.slime_pct < 0 or self.macro_pct < 0 or self.slime_pct + self.macro_pct > 100.0:
            raise ValidationError("slime_pct and macro_pct must be >= 0 and sum to <= 100")
        if self.blob_count < 1:
            raise ValidationError("blob_count must be >= 1")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _jittered_order(
    height: int, width: int, centers: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Pixel order by noisy distance to the nearest center (flat indices)."""
    ys, xs = np.mgrid[0:height, 0:width]
    coords = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    diff = coords[:, None, :] - centers[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2)).min(axis=1)
    dist += rng.uniform(0.0, 1.5, size=dist.shape)
    return np.argsort(dist, kind="stable")


def _place_mask(
    width: int,
    height: int,
    water_px: int,
    slime_px: int,
    macro_px: int,
    blob_count: int,
    rng: np.random.Generator,
) -> MaskRaster:
    """Lay out exact class pixel counts as blobby regions."""
    total = width * height
    labels = np.full(total, int(SegClass.CLEAN), dtype=np.uint8)

    if water_px > 0:
        # water grows down from jittered points on the top edge
        n_centers = min(blob_count, width)
        centers_x = rng.choice(width, size=n_centers, replace=False).astype(np.float64)
        centers = np.stack([np.zeros(n_centers), centers_x], axis=1)
        order = _jittered_order(height, width, centers, rng)
        labels[order[:water_px]] = int(SegClass.WATER)

    hull_flat = np.flatnonzero(labels != int(SegClass.WATER))
    for class_id, count in ((int(SegClass.MACROFOULING), macro_px), (int(SegClass.SLIME), slime_px)):
        if count == 0:
            continue
        free = hull_flat[labels[hull_flat] == int(SegClass.CLEAN)]
        seeds = rng.choice(free, size=min(blob_count, free.size), replace=False)
        centers = np.stack([seeds // width, seeds % width], axis=1).astype(np.float64)
        ys, xs = free // width, free % width
        coords = np.stack([ys, xs], axis=1).astype(np.float64)
        diff = coords[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2)).min(axis=1)
        dist += rng.uniform(0.0, 1.5, size=dist.shape)
        chosen = free[np.argsort(dist, kind="stable")[:count]]
        labels[chosen] = class_id

    return MaskRaster(labels.reshape(height, width))


def generate_mask(spec: SynthSpec) -> tuple[MaskRaster, CoverageReport]:
    """Build a mask whose coverage report is exact by pixel count.

    Raises when a nonzero target rounds to zero pixels (or the counts
    overflow the hull) at the requested resolution.
    """
    rng = np.random.default_rng(spec.seed)
    total = spec.width * spec.height
    water_px = _round_half_up(spec.water_fraction * total)
    hull = total - water_px
    if hull <= 0:
        raise ValidationError(f"water fraction {spec.water_fraction} leaves no hull pixels")

    slime_px = _round_half_up(spec.slime_pct / 100.0 * hull)
    macro_px = _round_half_up(spec.macro_pct / 100.0 * hull)
    for name, pct, count in (("slime", spec.slime_pct, slime_px), ("macro", spec.macro_pct, macro_px)):
        if pct > 0 and count == 0:
            raise ValidationError(
                f"{name} target {pct}% of a {hull}-pixel hull rounds to zero pixels"
            )
    if slime_px + macro_px > hull:
        raise ValidationError(
            f"targets need {slime_px + macro_px} pixels but the hull has only {hull}"
        )

    mask = _place_mask(spec.width, spec.height, water_px, slime_px, macro_px, spec.blob_count, rng)
    report = CoverageReport(
        hull_pixels=hull,
        water_pixels=water_px,
        clean_pct=(hull - slime_px - macro_px) / hull * 100.0,
        slime_pct=slime_px / hull * 100.0,
        macro_pct=macro_px / hull * 100.0,
    )
    return mask, report


def generate_video(
    spec: SynthSpec, frames: int, noise_level: float
) -> tuple[FrameSequence, MaskRaster]:
    """Per-frame probabilities around a fixed base mask, noisy enough to flip.

    Each frame mixes the one-hot base with seeded exponential noise; at
    noise 0 every frame is the exact one-hot raster.
    """
    if frames < 2:
        raise ValidationError(f"video needs at least 2 frames, got {frames}")
    if not 0.0 <= noise_level < 1.0:
        raise ValidationError(f"noise_level must be in [0, 1), got {noise_level!r}")
    mask, _ = generate_mask(spec)
    onehot = np.zeros((spec.height, spec.width, 4), dtype=np.float64)
    ys, xs = np.mgrid[0 : spec.height, 0 : spec.width]
    onehot[ys, xs, mask.labels] = 1.0

    rng = np.random.default_rng(spec.seed)
    out = []
    for _ in range(frames):
        if noise_level == 0.0:
            probs = onehot.copy()
        else:
            noise = rng.exponential(1.0, size=onehot.shape)
            mixed = (1.0 - noise_level) * onehot + noise_level * noise
            probs = mixed / mixed.sum(axis=2, keepdims=True)
        out.append(ProbabilityRaster(probs))
    seq = FrameSequence(frames=tuple(out), timestamps=tuple(float(i) for i in range(frames)))
    return seq, mask


def _count_range_for_interval(hull: int, lo: float, hi: float) -> tuple[int, int]:
    """Integer pixel counts whose percent of hull falls in (lo, hi]."""
    k_min = int(math.floor(lo * hull / 100.0)) + 1
    while k_min * 100.0 / hull <= lo:
        k_min += 1
    k_max = min(hull, int(math.ceil(hi * hull / 100.0)))
    while k_max * 100.0 / hull > hi:
        k_max -= 1
    return k_min, k_max


def _counts_for_label(
    label: int, hull: int, cfg: ThresholdConfig, rng: np.random.Generator
) -> tuple[int, int]:
    """Draw (slime_px, macro_px) that classify to `label` under `cfg`."""
    if label == 0:
        return 0, 0
    if label == 1:
        return int(rng.integers(1, max(2, hull // 2))), 0
    intervals = {
        2: (cfg.macro_presence_epsilon, cfg.bound2),
        3: (cfg.bound2, cfg.bound3),
        4: (cfg.bound3, cfg.bound4),
        5: (cfg.bound4, 100.0),
    }
    lo, hi = intervals[label]
    k_min, k_max = _count_range_for_interval(hull, lo, hi)
    if k_min > k_max:
        raise ValidationError(
            f"no pixel count in a {hull}-pixel hull lands in ({lo}, {hi}]% for LoF {label}"
        )
    macro_px = int(rng.integers(k_min, k_max + 1))
    slime_px = int(rng.integers(0, hull - macro_px + 1))
    return slime_px, macro_px


def generate_dataset(
    class_counts: tuple[int, ...] | list[int],
    out_dir: str | Path,
    seed: int = 0,
    width: int = 64,
    height: int = 64,
    thresholds: ThresholdConfig = FIGURE1_DEFAULT,
    blob_count: int = 4,
) -> DatasetManifest:
    """Write a labelled synthetic dataset: manifest, masks, and RGB renders.

    Every record's mask is constructed so the rule engine reproduces its
    label exactly; that is asserted against `classify_lof` before writing.
    """
    counts = list(class_counts)
    if len(counts) != 6 or any(c < 0 for c in counts) or sum(counts) < 1:
        raise ValidationError("class_counts must be six non-negative counts with a positive sum")

    out_dir = Path(out_dir)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    labels_in_order = [rank for rank in range(6) for _ in range(counts[rank])]
    records = []
    for idx, label in enumerate(labels_in_order):
        rng = np.random.default_rng([seed, idx])
        total = width * height
        water_px = _round_half_up(float(rng.uniform(0.2, 0.45)) * total)
        hull = total - water_px
        slime_px, macro_px = _counts_for_label(label, hull, thresholds, rng)

        obs = FoulingObservation(
            slime_pct=slime_px / hull * 100.0, macro_pct=macro_px / hull * 100.0
        )
        produced = classify_lof(obs, thresholds)
        if produced != label:
            raise ValidationError(
                f"internal: drew counts rating LoF {produced}, wanted {label} (hull={hull})"
            )

        mask = _place_mask(width, height, water_px, slime_px, macro_px, blob_count, rng)
        record_id = f"synth-{idx:04d}"
        write_mask(mask, out_dir / "masks" / f"{record_id}.png")
        Image.fromarray(render_mask_rgb(mask), mode="RGB").save(
            out_dir / "images" / f"{record_id}.png", format="PNG"
        )
        records.append(
            ImageRecord(
                id=record_id,
                path=f"images/{record_id}.png",
                lof_label=label,
                source="synthetic",
                media=Media(),
            )
        )

    manifest = DatasetManifest(records=tuple(records))
    save_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest
