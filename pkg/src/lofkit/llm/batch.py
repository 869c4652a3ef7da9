"""Batch assessment over a manifest with journaling and bounded parallelism.

Every image yields exactly one result: submission or encoding failures
become `unclassified` entries with the error noted, never exceptions, so a
single bad image cannot abort a long batch. Completed ids are journaled
(JSON lines, append-only, written only by the coordinating thread) and
skipped on rerun.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Sequence

from ..dataio import DatasetManifest, ImageRecord
from ..errors import ValidationError
from ..metrics import ScoredPrediction
from .client import EndpointConfig, submit
from .encode import encode_image
from .parse import STATUS_UNCLASSIFIED, ParsedAssessment, parse_response
from .prompts import PromptTemplate, build_prompt
from .retrieval import GuidelineChunk

logger = logging.getLogger(__name__)


def _journal_line(image_id: str, assessment: ParsedAssessment) -> str:
    return json.dumps(
        {
            "image_id": image_id,
            "status": assessment.status,
            "rank": assessment.rank,
            "coverage_pct": assessment.coverage_pct,
            "species_note": assessment.species_note,
            "risk_note": assessment.risk_note,
            "raw": assessment.raw_text,
            "error": assessment.error,
        },
        sort_keys=True,
    )


def load_journal(path: str | Path) -> dict[str, ParsedAssessment]:
    """Read completed assessments back from a journal file."""
    path = Path(path)
    results: dict[str, ParsedAssessment] = {}
    if not path.exists():
        return results
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                results[obj["image_id"]] = ParsedAssessment(
                    status=obj["status"],
                    rank=obj.get("rank"),
                    coverage_pct=obj.get("coverage_pct"),
                    species_note=obj.get("species_note"),
                    risk_note=obj.get("risk_note"),
                    raw_text=obj.get("raw", ""),
                    error=obj.get("error"),
                )
            except (json.JSONDecodeError, KeyError, ValidationError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad journal line: {exc}") from None
    return results


def _assess_one(
    record: ImageRecord,
    images_root: Path | None,
    template: PromptTemplate,
    endpoint: EndpointConfig,
    chunks: Sequence[GuidelineChunk],
    model_id: str,
    temperature: float,
    max_tokens: int,
    timeout: float,
) -> ParsedAssessment:
    try:
        image_path = Path(record.path)
        if images_root is not None and not image_path.is_absolute():
            image_path = images_root / image_path
        payload, media_type = encode_image(image_path)
        request = build_prompt(
            template,
            payload,
            media_type=media_type,
            chunks=chunks,
            model_id=model_id,
            temperature=temperature,
            max_tokens=max_tokens,
            timeout=timeout,
        )
        raw = submit(request, endpoint)
        return parse_response(raw)
    except Exception as exc:  # per-image isolation: any failure -> unclassified
        logger.warning("image %s failed: %s", record.id, exc)
        return ParsedAssessment(
            status=STATUS_UNCLASSIFIED, raw_text="", error=f"{exc.__class__.__name__}: {exc}"
        )


def run_batch(
    manifest: DatasetManifest,
    template: PromptTemplate,
    endpoint: EndpointConfig,
    journal_path: str | Path,
    images_root: str | Path | None = None,
    concurrency: int = 4,
    chunks: Sequence[GuidelineChunk] = (),
    model_id: str = "openai/gpt-4o",
    temperature: float = 0.0,
    max_tokens: int = 512,
    timeout: float = 60.0,
) -> list[tuple[str, ParsedAssessment]]:
    """Assess every manifest image, returning results in manifest order."""
    if concurrency < 1:
        raise ValidationError(f"concurrency must be >= 1, got {concurrency}")
    journal_path = Path(journal_path)
    images_root = Path(images_root) if images_root is not None else None

    results = load_journal(journal_path)
    pending = [r for r in manifest.records if r.id not in results]
    if results:
        logger.info("journal has %d completed ids; %d pending", len(results), len(pending))

    if pending:
        with journal_path.open("a") as journal, ThreadPoolExecutor(max_workers=concurrency) as pool:
            futures = {
                pool.submit(
                    _assess_one,
                    record,
                    images_root,
                    template,
                    endpoint,
                    chunks,
                    model_id,
                    temperature,
                    max_tokens,
                    timeout,
                ): record.id
                for record in pending
            }
            for future in as_completed(futures):
                image_id = futures[future]
                assessment = future.result()
                results[image_id] = assessment
                journal.write(_journal_line(image_id, assessment) + "\n")
                journal.flush()

    return [(record.id, results[record.id]) for record in manifest.records]


def scored_from_results(
    results: Sequence[tuple[str, ParsedAssessment]]
) -> list[ScoredPrediction]:
    """Convert batch output into scoring inputs (unclassified -> top1 None)."""
    return [
        ScoredPrediction(image_id=image_id, top1=a.rank if a.is_classified else None)
        for image_id, a in results
    ]


def classification_rate(results: Sequence[tuple[str, ParsedAssessment]]) -> float:
    """Fraction of results that produced a rating; denominator is all results."""
    if not results:
        raise ValidationError("classification_rate needs at least one result")
    return sum(1 for _, a in results if a.is_classified) / len(results)
