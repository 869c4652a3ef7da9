"""Scoring of predictions against expert LoF labels.

A prediction source may leave images unclassified (an LLM refusing to
answer still counts against it), so "accuracy" is ambiguous: this module
always reports both denominators — accuracy over classified images and
accuracy over all images — together with the classification rate that
links them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coverage import CoverageHistogram
from .dataio import PredictionRecord
from .errors import ValidationError
from .rules import MAX_RANK, MIN_RANK, validate_rank

N_RANKS = MAX_RANK - MIN_RANK + 1


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """6x6 counts; rows are true LoF ranks, columns predicted ranks."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_RANKS, N_RANKS):
            raise ValidationError(f"confusion matrix must be {N_RANKS}x{N_RANKS}, got {counts.shape}")
        if (counts < 0).any():
            raise ValidationError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def confusion(pairs: Sequence[tuple[int, int]]) -> ConfusionMatrix:
    """Tally (true rank, predicted rank) pairs."""
    if not pairs:
        raise ValidationError("confusion needs at least one (true, predicted) pair")
    counts = np.zeros((N_RANKS, N_RANKS), dtype=np.int64)
    for true_rank, predicted in pairs:
        counts[validate_rank(true_rank), validate_rank(predicted)] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ScoredPrediction:
    """One model answer for one image; `top1 is None` means unclassified."""

    image_id: str
    top1: int | None
    top2: int | None = None


def scored_from_predictions(records: Iterable[PredictionRecord]) -> list[ScoredPrediction]:
    return [ScoredPrediction(r.image_id, r.top1, r.top2) for r in records]


@dataclass(frozen=True)
class MetricsReport:
    overall_accuracy: float | None
    per_class_accuracy: tuple[float | None, ...]
    top2_accuracy: float | None
    classification_rate: float
    accuracy_over_classified: float | None
    accuracy_over_all: float
    n_total: int
    n_classified: int

    def to_json(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "per_class_accuracy": list(self.per_class_accuracy),
            "top2_accuracy": self.top2_accuracy,
            "classification_rate": self.classification_rate,
            "accuracy_over_classified": self.accuracy_over_classified,
            "accuracy_over_all": self.accuracy_over_all,
            "n_total": self.n_total,
            "n_classified": self.n_classified,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "MetricsReport":
        return cls(
            overall_accuracy=obj["overall_accuracy"],
            per_class_accuracy=tuple(obj["per_class_accuracy"]),
            top2_accuracy=obj["top2_accuracy"],
            classification_rate=obj["classification_rate"],
            accuracy_over_classified=obj["accuracy_over_classified"],
            accuracy_over_all=obj["accuracy_over_all"],
            n_total=obj["n_total"],
            n_classified=obj["n_classified"],
        )


def compute_metrics(
    truth: Mapping[str, int], preds: Sequence[ScoredPrediction]
) -> MetricsReport:
    """Score predictions against expert labels.

    Unclassified predictions lower the classification rate and
    accuracy_over_all but are excluded from accuracy_over_classified and
    the per-class figures. Per-class accuracy for a class with no scored
    pairs is reported as None, never 0.
    """
    if not preds:
        raise ValidationError("compute_metrics needs at least one prediction")
    seen: set[str] = set()
    for pred in preds:
        if pred.image_id not in truth:
            raise ValidationError(f"prediction for unknown image id {pred.image_id!r}")
        if pred.image_id in seen:
            raise ValidationError(f"duplicate prediction for image id {pred.image_id!r}")
        seen.add(pred.image_id)

    n_total = len(preds)
    classified = [p for p in preds if p.top1 is not None]
    n_classified = len(classified)

    counts = np.zeros((N_RANKS, N_RANKS), dtype=np.int64)
    top2_hits = 0
    for pred in classified:
        true_rank = validate_rank(truth[pred.image_id])
        counts[true_rank, validate_rank(pred.top1)] += 1
        if true_rank == pred.top1 or (pred.top2 is not None and true_rank == pred.top2):
            top2_hits += 1

    correct = int(np.trace(counts))
    classification_rate = n_classified / n_total
    accuracy_over_all = correct / n_total
    if n_classified:
        accuracy_over_classified = correct / n_classified
        top2_accuracy = top2_hits / n_classified
    else:
        accuracy_over_classified = None
        top2_accuracy = None

    per_class: list[float | None] = []
    row_sums = counts.sum(axis=1)
    for rank in range(N_RANKS):
        if row_sums[rank] == 0:
            per_class.append(None)
        else:
            per_class.append(float(counts[rank, rank] / row_sums[rank]))

    return MetricsReport(
        overall_accuracy=accuracy_over_classified,
        per_class_accuracy=tuple(per_class),
        top2_accuracy=top2_accuracy,
        classification_rate=classification_rate,
        accuracy_over_classified=accuracy_over_classified,
        accuracy_over_all=accuracy_over_all,
        n_total=n_total,
        n_classified=n_classified,
    )


def confusion_from_scored(
    truth: Mapping[str, int], preds: Sequence[ScoredPrediction]
) -> ConfusionMatrix:
    """Confusion over the classified predictions only."""
    pairs = [(truth[p.image_id], p.top1) for p in preds if p.top1 is not None]
    if not pairs:
        raise ValidationError("no classified predictions to tally")
    return confusion(pairs)


# ---------------------------------------------------------------------------
# Report rendering: machine-readable JSON, a Markdown summary, and a
# stacked-bar SVG of the per-class prediction mix. All three are
# byte-deterministic for identical inputs.
# ---------------------------------------------------------------------------

_BAR_COLORS = ("#1b7837", "#a6dba0", "#fee08b", "#fdae61", "#d73027", "#7b3294")


def _fmt_rate(value: float | None) -> str:
    return "n/a" if value is None else f"{value * 100:.2f}%"


def render_markdown(metrics: MetricsReport, matrix: ConfusionMatrix) -> str:
    lines = [
        "# Evaluation report",
        "",
        "| metric | value |",
        "| --- | --- |",
        f"| images scored | {metrics.n_total} |",
        f"| images classified | {metrics.n_classified} |",
        f"| classification rate | {_fmt_rate(metrics.classification_rate)} |",
        f"| accuracy (classified) | {_fmt_rate(metrics.accuracy_over_classified)} |",
        f"| accuracy (all images) | {_fmt_rate(metrics.accuracy_over_all)} |",
        f"| top-2 accuracy (classified) | {_fmt_rate(metrics.top2_accuracy)} |",
        "",
        "## Per-class accuracy",
        "",
        "| LoF | images | accuracy |",
        "| --- | --- | --- |",
    ]
    row_sums = matrix.row_sums()
    for rank in range(N_RANKS):
        lines.append(f"| {rank} | {int(row_sums[rank])} | {_fmt_rate(metrics.per_class_accuracy[rank])} |")
    lines += ["", "## Confusion matrix (rows=true, columns=predicted)", ""]
    header = "| true\\pred | " + " | ".join(str(r) for r in range(N_RANKS)) + " |"
    lines.append(header)
    lines.append("| --- |" + " --- |" * N_RANKS)
    for rank in range(N_RANKS):
        cells = " | ".join(str(int(v)) for v in matrix.counts[rank])
        lines.append(f"| {rank} | {cells} |")
    return "\n".join(lines) + "\n"


def render_stacked_bars_svg(matrix: ConfusionMatrix, title: str = "Predicted LoF mix per true class") -> str:
    """One column per true class, stacked segments colored by predicted class."""
    width, height = 640, 420
    margin_left, margin_bottom, margin_top = 60, 50, 40
    plot_h = height - margin_bottom - margin_top
    col_w = (width - margin_left - 40) / N_RANKS
    max_total = max(1, int(matrix.row_sums().max()))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
    ]
    for rank in range(N_RANKS):
        x = margin_left + rank * col_w + col_w * 0.15
        bar_w = col_w * 0.7
        y = height - margin_bottom
        for predicted in range(N_RANKS):
            count = int(matrix.counts[rank, predicted])
            if count == 0:
                continue
            seg_h = plot_h * count / max_total
            y -= seg_h
            parts.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" height="{seg_h:.2f}" '
                f'fill="{_BAR_COLORS[predicted]}" stroke="black" stroke-width="0.5"/>'
            )
        parts.append(
            f'<text x="{x + bar_w / 2:.2f}" y="{height - margin_bottom + 18}" '
            f'text-anchor="middle" font-size="12">LoF {rank}</text>'
        )
    for predicted in range(N_RANKS):
        lx = margin_left + predicted * 90
        parts.append(
            f'<rect x="{lx}" y="{height - 20}" width="12" height="12" fill="{_BAR_COLORS[predicted]}"/>'
        )
        parts.append(
            f'<text x="{lx + 16}" y="{height - 10}" font-size="11">pred {predicted}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_report(
    metrics: MetricsReport,
    matrix: ConfusionMatrix,
    destination: str | Path,
    histograms: CoverageHistogram | None = None,
) -> list[Path]:
    """Write report.json, report.md, and per_class.svg into `destination`."""
    if matrix.total == 0:
        raise ValidationError("refusing to emit a report for an empty confusion matrix")
    destination = Path(destination)
    destination.mkdir(parents=True, exist_ok=True)

    payload: dict = {
        "metrics": metrics.to_json(),
        "confusion": matrix.counts.tolist(),
    }
    if histograms is not None:
        payload["coverage_histograms"] = {
            "bin_edges": histograms.bin_edges.tolist(),
            "slime_counts": histograms.slime_counts.tolist(),
            "macro_counts": histograms.macro_counts.tolist(),
        }

    json_path = destination / "report.json"
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    md_path = destination / "report.md"
    md_path.write_text(render_markdown(metrics, matrix))
    svg_path = destination / "per_class.svg"
    svg_path.write_text(render_stacked_bars_svg(matrix))
    return [json_path, md_path, svg_path]
