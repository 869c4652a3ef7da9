"""Confidence-weighted temporal smoothing of per-frame class probabilities.

Per-frame segmentation output flickers between slime and macrofouling on
near-identical video frames; averaging each pixel's class vector over a
centered window damps those argmax flips. Windows truncate at sequence
ends rather than padding, so no frames are fabricated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coverage import ProbabilityRaster
from .errors import ValidationError

WEIGHTINGS = ("uniform", "confidence", "class-mass")


@dataclass(frozen=True, eq=False)
class FrameSequence:
    """Ordered per-frame probability rasters, optionally timestamped."""

    frames: tuple[ProbabilityRaster, ...]
    timestamps: tuple[float, ...] | None = None

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ValidationError("frame sequence must not be empty")
        shape = frames[0].probs.shape
        for i, frame in enumerate(frames):
            if frame.probs.shape != shape:
                raise ValidationError(
                    f"frame {i} has shape {frame.probs.shape}, expected {shape}"
                )
        if self.timestamps is not None:
            stamps = tuple(float(t) for t in self.timestamps)
            if len(stamps) != len(frames):
                raise ValidationError("timestamps must match the number of frames")
            if any(b <= a for a, b in zip(stamps, stamps[1:])):
                raise ValidationError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", stamps)
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return len(self.frames)

    def as_array(self) -> np.ndarray:
        """Stack frames into shape (frames, height, width, classes)."""
        return np.stack([f.probs for f in self.frames], axis=0)


def smooth_sequence(
    seq: FrameSequence, window: int = 5, weighting: str = "confidence"
) -> FrameSequence:
    """Average each pixel's class vector over a centered window of frames.

    `uniform` weights frames equally; `confidence` weights each frame's
    pixel by its max class probability; `class-mass` weights each class
    channel by its own probability before renormalizing. Windows are
    truncated at sequence boundaries. Accumulation runs in extended
    precision so smoothing a constant sequence is an exact identity.
    """
    if weighting not in WEIGHTINGS:
        raise ValidationError(f"unknown weighting {weighting!r} (use one of {WEIGHTINGS})")
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    if window % 2 == 0:
        raise ValidationError(f"window must be odd, got {window}")
    if window == 1:
        return seq

    stack = seq.as_array().astype(np.longdouble)
    n_frames = stack.shape[0]
    half = window // 2

    if weighting == "uniform":
        weights = np.ones(stack.shape[:3], dtype=np.longdouble)[..., None]
    elif weighting == "confidence":
        weights = stack.max(axis=3)[..., None]
    else:  # class-mass: every class channel is its own weight
        weights = stack

    weighted = stack * weights
    out = np.empty_like(stack)
    for t in range(n_frames):
        lo, hi = max(0, t - half), min(n_frames, t + half + 1)
        num = weighted[lo:hi].sum(axis=0)
        den = weights[lo:hi].sum(axis=0)
        frame = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
        frame /= frame.sum(axis=2, keepdims=True)
        out[t] = frame

    frames = tuple(ProbabilityRaster(out[t].astype(np.float64)) for t in range(n_frames))
    return FrameSequence(frames=frames, timestamps=seq.timestamps)


def flip_rate(seq: FrameSequence) -> float:
    """Fraction of (pixel, consecutive-frame) pairs whose argmax class differs."""
    if len(seq) < 2:
        raise ValidationError("flip_rate needs at least two frames")
    labels = np.stack([f.argmax_labels() for f in seq.frames], axis=0)
    flips = labels[1:] != labels[:-1]
    return float(flips.mean())
