"""Strict-but-total parsing of free-text assessment responses.

Parsing never raises: anything that does not yield an in-range rating is a
valid `unclassified` result, which is exactly what the classification-rate
metric counts. The fallback ladder is fixed so the rate is reproducible
across runs and implementations of the response format.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ValidationError
from ..rules import MAX_RANK, MIN_RANK

STATUS_CLASSIFIED = "classified"
STATUS_UNCLASSIFIED = "unclassified"

# Tried in order; the first pattern that matches decides the outcome, and an
# out-of-range integer makes the response unclassified rather than falling
# through to laxer patterns.
_RATING_PATTERNS = (
    re.compile(r"^\s*\*\*LoF Rating:\*\*\s*(-?\d+)", re.MULTILINE),
    re.compile(r"\bLoF Rating:\s*(-?\d+)"),
    re.compile(r"\bLoF\s*[:#]?\s*(-?\d+)\b"),
    re.compile(r"^\s*(-?\d+)\b"),
)

_COVERAGE = re.compile(r"\*{0,2}Coverage:\*{0,2}\s*~?(-?\d+(?:\.\d+)?)\s*%")
_SPECIES = re.compile(r"^\s*\*{0,2}Species:\*{0,2}\s*(.+?)\s*$", re.MULTILINE)
_RISK = re.compile(r"^\s*\*{0,2}Risk:\*{0,2}\s*(.+?)\s*$", re.MULTILINE)


@dataclass(frozen=True)
class ParsedAssessment:
    """Structured result extracted from one response."""

    status: str
    rank: int | None = None
    coverage_pct: float | None = None
    species_note: str | None = None
    risk_note: str | None = None
    raw_text: str = ""
    error: str | None = None

    def __post_init__(self):
        if self.status not in (STATUS_CLASSIFIED, STATUS_UNCLASSIFIED):
            raise ValidationError(f"unknown assessment status {self.status!r}")
        if self.status == STATUS_CLASSIFIED and (
            self.rank is None or not MIN_RANK <= self.rank <= MAX_RANK
        ):
            raise ValidationError(f"classified assessment needs a rank in 0..5, got {self.rank!r}")

    @property
    def is_classified(self) -> bool:
        return self.status == STATUS_CLASSIFIED


def parse_response(raw: str) -> ParsedAssessment:
    """Extract a rating and the labeled detail lines from free text."""
    text = raw if isinstance(raw, str) else str(raw)

    rank: int | None = None
    for pattern in _RATING_PATTERNS:
        match = pattern.search(text)
        if match:
            value = int(match.group(1))
            if MIN_RANK <= value <= MAX_RANK:
                rank = value
            break

    coverage = None
    cov_match = _COVERAGE.search(text)
    if cov_match:
        value = float(cov_match.group(1))
        if 0.0 <= value <= 100.0:
            coverage = value
    species_match = _SPECIES.search(text)
    risk_match = _RISK.search(text)

    if rank is None:
        return ParsedAssessment(status=STATUS_UNCLASSIFIED, raw_text=text)
    return ParsedAssessment(
        status=STATUS_CLASSIFIED,
        rank=rank,
        coverage_pct=coverage,
        species_note=species_match.group(1) if species_match else None,
        risk_note=risk_match.group(1) if risk_match else None,
        raw_text=text,
    )


RANK_DESCRIPTIONS = {
    0: "No visible fouling, completely clean surface",
    1: "Slime layer only, no macrofouling",
    2: "Sparse macrofouling (1-5 percent cover)",
    3: "Moderate macrofouling patches (6-15 percent cover)",
    4: "Extensive macrofouling (16-40 percent cover)",
    5: "Heavy macrofouling (41-100 percent cover)",
}


def format_assessment(assessment: ParsedAssessment) -> str:
    """Render a classified assessment in the exact response format."""
    if not assessment.is_classified:
        raise ValidationError("only classified assessments can be formatted")
    coverage = assessment.coverage_pct
    coverage_text = f"{coverage:g}%" if coverage is not None else "not estimated"
    species = assessment.species_note or "none identified"
    risk = assessment.risk_note or "not assessed"
    return (
        f"**LoF Rating:** {assessment.rank} - {RANK_DESCRIPTIONS[assessment.rank]}\n"
        f"**Coverage:** {coverage_text} of visible surface\n"
        f"**Species:** {species}\n"
        f"**Risk:** {risk}\n"
    )
