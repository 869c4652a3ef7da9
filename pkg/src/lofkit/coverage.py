"""Hull-relative coverage computation from 4-class segmentation rasters.

Coverage percentages are computed over hull pixels (everything that is not
Water), which is what the LoF thresholds are defined against. The basis is
recorded on every report so downstream consumers can tell how the
denominators were chosen.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .errors import NoHullVisibleError, ValidationError


class SegClass(IntEnum):
    WATER = 0
    CLEAN = 1
    SLIME = 2
    MACROFOULING = 3


N_CLASSES = len(SegClass)

#: Default simplex tolerance for per-pixel probability vectors.
PROB_ATOL = 1e-6


@dataclass(frozen=True, eq=False)
class MaskRaster:
    """Hard per-pixel class labels, shape (height, width)."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.size == 0:
            raise ValidationError(f"mask labels must be a non-empty 2-D grid, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise ValidationError(f"mask labels must be integers, got dtype {labels.dtype}")
        if labels.min() < 0 or labels.max() >= N_CLASSES:
            raise ValidationError("mask labels must be SegClass values in 0..3")
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True, eq=False)
class ProbabilityRaster:
    """Per-pixel class probabilities, shape (height, width, 4).

    Each pixel's 4-vector must sum to 1 within `atol`. Codecs that
    dequantize 16-bit planes construct these with a relaxed tolerance.
    """

    probs: np.ndarray
    atol: float = PROB_ATOL

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[2] != N_CLASSES or probs.shape[0] == 0 or probs.shape[1] == 0:
            raise ValidationError(
                f"probability raster must have shape (h, w, {N_CLASSES}), got {probs.shape}"
            )
        if probs.min() < -self.atol or probs.max() > 1 + self.atol:
            raise ValidationError("probabilities must lie in [0, 1]")
        sums = probs.sum(axis=2)
        if not np.allclose(sums, 1.0, rtol=0.0, atol=self.atol):
            worst = float(np.abs(sums - 1.0).max())
            raise ValidationError(f"per-pixel probabilities must sum to 1 (worst deviation {worst:g})")
        object.__setattr__(self, "probs", probs)

    @property
    def height(self) -> int:
        return self.probs.shape[0]

    @property
    def width(self) -> int:
        return self.probs.shape[1]

    def argmax_labels(self) -> np.ndarray:
        """Per-pixel argmax class, ties broken by lowest class index."""
        return np.argmax(self.probs, axis=2)


@dataclass(frozen=True)
class CoverageReport:
    """Percent cover of clean/slime/macrofouling over the hull area.

    `hull_pixels`/`water_pixels` are integral for hard masks and may be
    fractional probability mass in expected-coverage mode.
    """

    hull_pixels: float
    water_pixels: float
    clean_pct: float
    slime_pct: float
    macro_pct: float
    basis: str = "hull"


def compute_coverage(mask: MaskRaster) -> CoverageReport:
    """Count class pixels and express each class as percent of hull area."""
    counts = np.bincount(mask.labels.ravel(), minlength=N_CLASSES)
    water = int(counts[SegClass.WATER])
    hull = int(mask.labels.size - water)
    if hull == 0:
        raise NoHullVisibleError("no hull visible: every pixel is Water")
    return CoverageReport(
        hull_pixels=hull,
        water_pixels=water,
        clean_pct=float(counts[SegClass.CLEAN] / hull * 100.0),
        slime_pct=float(counts[SegClass.SLIME] / hull * 100.0),
        macro_pct=float(counts[SegClass.MACROFOULING] / hull * 100.0),
    )


def compute_coverage_soft(probs: ProbabilityRaster, mode: str = "argmax") -> CoverageReport:
    """Coverage from per-pixel probabilities.

    `argmax` reduces to hard counting on the per-pixel argmax. `expected`
    sums per-class probability mass, with hull mass = total - Water mass;
    a hull mass below one pixel-equivalent cannot be rated.
    """
    if mode == "argmax":
        return compute_coverage(MaskRaster(probs.argmax_labels()))
    if mode != "expected":
        raise ValidationError(f"unknown coverage mode {mode!r} (use 'argmax' or 'expected')")
    mass = probs.probs.reshape(-1, N_CLASSES).sum(axis=0)
    hull_mass = float(probs.probs.shape[0] * probs.probs.shape[1] - mass[SegClass.WATER])
    if hull_mass < 1.0:
        raise NoHullVisibleError(f"no hull visible: hull mass {hull_mass:g} is below one pixel")
    return CoverageReport(
        hull_pixels=hull_mass,
        water_pixels=float(mass[SegClass.WATER]),
        clean_pct=float(mass[SegClass.CLEAN]) / hull_mass * 100.0,
        slime_pct=float(mass[SegClass.SLIME]) / hull_mass * 100.0,
        macro_pct=float(mass[SegClass.MACROFOULING]) / hull_mass * 100.0,
    )


@dataclass(frozen=True, eq=False)
class CoverageHistogram:
    """Binned counts of slime and macrofouling percentages across reports.

    Bins are half-open [lo, hi) except the last, which includes its upper
    edge so 100% cover lands in the top bin.
    """

    bin_edges: np.ndarray
    slime_counts: np.ndarray
    macro_counts: np.ndarray


def coverage_distribution(
    reports: Sequence[CoverageReport] | Iterable[CoverageReport],
    bin_width: float = 5.0,
) -> CoverageHistogram:
    """Histogram slime/macro percent cover, e.g. to spot all-or-nothing modes."""
    reports = list(reports)
    if not reports:
        raise ValidationError("coverage_distribution needs at least one report")
    if bin_width <= 0:
        raise ValidationError(f"bin width must be positive, got {bin_width!r}")
    edges = np.arange(0.0, 100.0 + bin_width, bin_width)
    if edges[-1] < 100.0:
        edges = np.append(edges, 100.0)
    slime = np.array([r.slime_pct for r in reports])
    macro = np.array([r.macro_pct for r in reports])
    slime_counts, _ = np.histogram(slime, bins=edges)
    macro_counts, _ = np.histogram(macro, bins=edges)
    return CoverageHistogram(bin_edges=edges, slime_counts=slime_counts, macro_counts=macro_counts)
