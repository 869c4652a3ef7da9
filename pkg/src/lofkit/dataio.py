"""Dataset manifests, deterministic splits, raster codecs, prediction files.

Every format here is an interchange surface: JSON-lines manifests, a JSON
split file with create-once semantics, indexed-palette mask PNGs, 16-bit
probability PNGs, and the prediction CSV. Writers are byte-deterministic
so repeated runs with the same inputs produce identical files.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .coverage import N_CLASSES, MaskRaster, ProbabilityRaster, SegClass
from .errors import CodecError, ManifestError, SplitError, ValidationError
from .rules import MAX_RANK, MIN_RANK

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

MEDIA_STILL = "still"
MEDIA_VIDEO_FRAME = "video-frame"


@dataclass(frozen=True)
class Media:
    """Provenance of one image: a still, or a frame within a video sequence."""

    kind: str = MEDIA_STILL
    sequence_id: str | None = None
    frame_index: int | None = None

    def __post_init__(self):
        if self.kind == MEDIA_STILL:
            if self.sequence_id is not None or self.frame_index is not None:
                raise ValidationError("still media must not carry sequence fields")
        elif self.kind == MEDIA_VIDEO_FRAME:
            if self.sequence_id is None or self.frame_index is None:
                raise ValidationError("video-frame media needs sequence_id and frame_index")
        else:
            raise ValidationError(f"unknown media kind {self.kind!r}")

    def to_json(self) -> dict:
        if self.kind == MEDIA_STILL:
            return {"kind": self.kind}
        return {"kind": self.kind, "sequence_id": self.sequence_id, "frame_index": self.frame_index}

    @classmethod
    def from_json(cls, obj: dict) -> "Media":
        return cls(
            kind=obj.get("kind", MEDIA_STILL),
            sequence_id=obj.get("sequence_id"),
            frame_index=obj.get("frame_index"),
        )


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    lof_label: int
    source: str = ""
    media: Media = field(default_factory=Media)

    def __post_init__(self):
        if not self.id:
            raise ValidationError("image record id must be non-empty")
        if not isinstance(self.lof_label, int) or not MIN_RANK <= self.lof_label <= MAX_RANK:
            raise ValidationError(f"record {self.id!r}: lof_label {self.lof_label!r} not in 0..5")

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "path": self.path,
            "lof_label": self.lof_label,
            "source": self.source,
            "media": self.media.to_json(),
        }


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ImageRecord, ...]
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        records = tuple(self.records)
        if not records:
            raise ManifestError("manifest must contain at least one record")
        seen: set[str] = set()
        for record in records:
            if record.id in seen:
                raise ManifestError(f"duplicate record id {record.id!r}")
            seen.add(record.id)
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    def by_id(self) -> dict[str, ImageRecord]:
        return {r.id: r for r in self.records}

    def labels(self) -> dict[str, int]:
        return {r.id: r.lof_label for r in self.records}


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a JSON-lines manifest; malformed rows are reported with line numbers."""
    path = Path(path)
    records = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                records.append(
                    ImageRecord(
                        id=obj["id"],
                        path=obj["path"],
                        lof_label=obj["lof_label"],
                        source=obj.get("source", ""),
                        media=Media.from_json(obj.get("media", {})),
                    )
                )
            except KeyError as exc:
                raise ManifestError(f"{path}:{lineno}: missing field {exc}") from None
            except ValidationError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from None
    if not records:
        raise ManifestError(f"{path}: manifest is empty")
    return DatasetManifest(records=tuple(records))


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for record in manifest.records:
            fh.write(json.dumps(record.to_json(), sort_keys=True, separators=(",", ":")) + "\n")


@dataclass(frozen=True)
class DatasetStats:
    counts: dict[int, int]
    total: int


def dataset_stats(manifest: DatasetManifest) -> DatasetStats:
    """Per-LoF-class record counts plus the total."""
    counts = {rank: 0 for rank in range(MIN_RANK, MAX_RANK + 1)}
    for record in manifest.records:
        counts[record.lof_label] += 1
    return DatasetStats(counts=counts, total=len(manifest))


# ---------------------------------------------------------------------------
# Train/test split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError(f"train_fraction must be in (0, 1), got {self.train_fraction!r}")

    def to_json(self) -> dict:
        return {
            "train_fraction": self.train_fraction,
            "seed": self.seed,
            "stratified": self.stratified,
        }


@dataclass(frozen=True)
class SplitResult:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    spec: SplitSpec


def _test_count(n: int, train_fraction: float) -> int:
    # round half up, pinned so the same spec always yields the same counts
    return int(math.floor(n * (1.0 - train_fraction) + 0.5))


def make_split(manifest: DatasetManifest, spec: SplitSpec) -> SplitResult:
    """Deterministic train/test id split.

    Stratified mode rounds the test count per class so heavy class imbalance
    cannot empty a test class; ids are shuffled with a seeded RNG, so the
    same manifest and spec always produce the same split.
    """
    rng = random.Random(spec.seed)
    train: list[str] = []
    test: list[str] = []
    if spec.stratified:
        by_label: dict[int, list[str]] = {rank: [] for rank in range(MIN_RANK, MAX_RANK + 1)}
        for record in manifest.records:
            by_label[record.lof_label].append(record.id)
        for rank in range(MIN_RANK, MAX_RANK + 1):
            ids = sorted(by_label[rank])
            if not ids:
                logger.warning("stratified split: class %d has no records, skipping", rank)
                continue
            rng.shuffle(ids)
            k = _test_count(len(ids), spec.train_fraction)
            test.extend(ids[:k])
            train.extend(ids[k:])
    else:
        ids = sorted(manifest.ids())
        rng.shuffle(ids)
        k = _test_count(len(ids), spec.train_fraction)
        test.extend(ids[:k])
        train.extend(ids[k:])
    return SplitResult(train_ids=tuple(sorted(train)), test_ids=tuple(sorted(test)), spec=spec)


def write_split(result: SplitResult, path: str | Path) -> None:
    """Persist a split with create-exclusive semantics: a split is made once."""
    path = Path(path)
    payload = {
        "spec": result.spec.to_json(),
        "train_ids": list(result.train_ids),
        "test_ids": list(result.test_ids),
    }
    try:
        with path.open("x") as fh:
            fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    except FileExistsError:
        raise SplitError(f"split file {path} already exists; refusing to overwrite") from None


def load_split(path: str | Path) -> SplitResult:
    obj = json.loads(Path(path).read_text())
    return SplitResult(
        train_ids=tuple(obj["train_ids"]),
        test_ids=tuple(obj["test_ids"]),
        spec=SplitSpec(**obj["spec"]),
    )


# ---------------------------------------------------------------------------
# Mask raster codec: indexed-palette PNG with one registered color per class.
# ---------------------------------------------------------------------------

MASK_PALETTE: dict[SegClass, tuple[int, int, int]] = {
    SegClass.WATER: (0, 0, 255),
    SegClass.CLEAN: (255, 255, 0),
    SegClass.SLIME: (0, 128, 0),
    SegClass.MACROFOULING: (128, 0, 128),
}

_COLOR_TO_CLASS = {color: cls for cls, color in MASK_PALETTE.items()}


def write_mask(mask: MaskRaster, path_or_file) -> None:
    img = Image.fromarray(mask.labels.astype(np.uint8), mode="P")
    palette = []
    for cls in SegClass:
        palette.extend(MASK_PALETTE[cls])
    img.putpalette(palette)
    img.save(path_or_file, format="PNG")


def read_mask(path_or_file) -> MaskRaster:
    """Decode a mask PNG, rejecting any color outside the registered palette."""
    with Image.open(path_or_file) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    packed = (
        rgb[..., 0].astype(np.int32) << 16
    ) | (rgb[..., 1].astype(np.int32) << 8) | rgb[..., 2].astype(np.int32)
    labels = np.full(packed.shape, -1, dtype=np.int16)
    for color, cls in _COLOR_TO_CLASS.items():
        key = (color[0] << 16) | (color[1] << 8) | color[2]
        labels[packed == key] = int(cls)
    if (labels < 0).any():
        bad = np.unique(packed[labels < 0])
        colors = [f"({v >> 16}, {(v >> 8) & 0xFF}, {v & 0xFF})" for v in bad[:8]]
        raise CodecError(f"mask contains unregistered color(s): {', '.join(colors)}")
    return MaskRaster(labels.astype(np.uint8))


def render_mask_rgb(mask: MaskRaster) -> np.ndarray:
    """Flat-color RGB render of a mask using the registered palette."""
    lut = np.zeros((N_CLASSES, 3), dtype=np.uint8)
    for cls, color in MASK_PALETTE.items():
        lut[int(cls)] = color
    return lut[mask.labels]


# ---------------------------------------------------------------------------
# Probability raster codec: the four class planes are quantized to 16 bits
# and stacked vertically (Water, Clean, Slime, Macrofouling) into a single
# grayscale PNG, since PNG has no native 4-plane 16-bit layout.
# ---------------------------------------------------------------------------

PROB_SCALE = 65535
#: Worst-case simplex deviation after dequantizing the four planes.
PROB_DEQUANT_ATOL = N_CLASSES / PROB_SCALE


def write_probs(raster: ProbabilityRaster, path_or_file) -> None:
    quantized = np.round(raster.probs * PROB_SCALE).astype(np.uint16)
    planes = [quantized[:, :, int(cls)] for cls in SegClass]
    stacked = np.concatenate(planes, axis=0)
    Image.fromarray(stacked).save(path_or_file, format="PNG")


def read_probs(path_or_file) -> ProbabilityRaster:
    with Image.open(path_or_file) as img:
        arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] % N_CLASSES != 0:
        raise CodecError(
            f"probability PNG must stack {N_CLASSES} equal planes vertically, got shape {arr.shape}"
        )
    height = arr.shape[0] // N_CLASSES
    planes = [arr[i * height : (i + 1) * height].astype(np.float64) / PROB_SCALE for i in range(N_CLASSES)]
    return ProbabilityRaster(np.stack(planes, axis=2), atol=PROB_DEQUANT_ATOL)


# ---------------------------------------------------------------------------
# Prediction interchange CSV
# ---------------------------------------------------------------------------

PREDICTION_HEADER = ["image_id", "top1", "top2", "s0", "s1", "s2", "s3", "s4", "s5", "source_model"]


def top_two(scores: Sequence[float]) -> tuple[int, int]:
    """Indices of the best and second-best scores, ties broken by lowest index."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[0], order[1]


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    top1: int
    top2: int
    class_scores: tuple[float, ...]
    source_model: str = ""

    def __post_init__(self):
        scores = tuple(float(s) for s in self.class_scores)
        if len(scores) != MAX_RANK + 1:
            raise ValidationError(f"{self.image_id}: expected 6 class scores, got {len(scores)}")
        if not all(math.isfinite(s) for s in scores):
            raise ValidationError(f"{self.image_id}: class scores must be finite")
        t1, t2 = top_two(scores)
        if self.top1 != t1:
            raise ValidationError(
                f"{self.image_id}: top1={self.top1} inconsistent with argmax(scores)={t1}"
            )
        if self.top2 != t2:
            raise ValidationError(
                f"{self.image_id}: top2={self.top2} inconsistent with second argmax {t2}"
            )
        object.__setattr__(self, "class_scores", scores)


def save_predictions(records: Iterable[PredictionRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_HEADER)
        for record in records:
            writer.writerow(
                [record.image_id, record.top1, record.top2]
                + [repr(s) for s in record.class_scores]
                + [record.source_model]
            )


def load_predictions(
    path: str | Path, known_ids: set[str] | None = None
) -> list[PredictionRecord]:
    """Load and validate a prediction CSV.

    Records failing the argmax-consistency invariants raise; ids missing
    from `known_ids` (when given) are kept but logged, since only scored
    records need manifest membership and that is enforced at eval time.
    """
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PREDICTION_HEADER:
            raise CodecError(f"{path}: expected header {','.join(PREDICTION_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PREDICTION_HEADER):
                raise CodecError(f"{path}:{lineno}: expected {len(PREDICTION_HEADER)} fields")
            try:
                record = PredictionRecord(
                    image_id=row[0],
                    top1=int(row[1]),
                    top2=int(row[2]),
                    class_scores=tuple(float(v) for v in row[3:9]),
                    source_model=row[9],
                )
            except (ValueError, ValidationError) as exc:
                raise CodecError(f"{path}:{lineno}: {exc}") from None
            if known_ids is not None and record.image_id not in known_ids:
                logger.warning("%s:%d: image_id %r not in manifest", path, lineno, record.image_id)
            records.append(record)
    return records
