"""Deterministic lexical retrieval over a small guideline chunk store.

Chunks are scored by token overlap with the query (Jaccard) plus a small
bonus per query token that matches one of the chunk's tags; ties resolve
to the lower chunk id. No embeddings, no external services.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import ValidationError

ALLOWED_TAGS = frozenset({"scale-definition", "slime-vs-macro", "boundary-criteria"})

_TOKEN = re.compile(r"[a-z0-9]+")
_TAG_BONUS = 0.05


def tokenize(text: str) -> frozenset[str]:
    return frozenset(_TOKEN.findall(text.lower()))


@dataclass(frozen=True)
class GuidelineChunk:
    id: str
    text: str
    tags: frozenset[str]

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError(f"chunk {self.id!r} has empty text")
        tags = frozenset(self.tags)
        if not tags:
            raise ValidationError(f"chunk {self.id!r} has no tags")
        unknown = tags - ALLOWED_TAGS
        if unknown:
            raise ValidationError(f"chunk {self.id!r} has unknown tags {sorted(unknown)}")
        object.__setattr__(self, "tags", tags)


DEFAULT_CHUNKS: tuple[GuidelineChunk, ...] = (
    GuidelineChunk(
        id="scale-0",
        text="LoF 0: No slime and no macrofouling - a completely clean surface.",
        tags=frozenset({"scale-definition"}),
    ),
    GuidelineChunk(
        id="scale-1",
        text="LoF 1: Slime layer present in any amount, with no macrofouling visible.",
        tags=frozenset({"scale-definition"}),
    ),
    GuidelineChunk(
        id="scale-2",
        text="LoF 2: Sparse macrofouling covering 1-5 percent of the visible surface.",
        tags=frozenset({"scale-definition", "boundary-criteria"}),
    ),
    GuidelineChunk(
        id="scale-3",
        text="LoF 3: Moderate macrofouling patches covering 6-15 percent of the visible surface.",
        tags=frozenset({"scale-definition", "boundary-criteria"}),
    ),
    GuidelineChunk(
        id="scale-4",
        text="LoF 4: Extensive macrofouling covering 16-40 percent of the visible surface.",
        tags=frozenset({"scale-definition", "boundary-criteria"}),
    ),
    GuidelineChunk(
        id="scale-5",
        text="LoF 5: Heavy macrofouling covering 41-100 percent of the visible surface.",
        tags=frozenset({"scale-definition", "boundary-criteria"}),
    ),
    GuidelineChunk(
        id="slime-vs-macro",
        text=(
            "A slime layer (biofilm) is a film of microscopic organisms with no visible "
            "individuals; macrofouling means visible organisms such as barnacles, algae, "
            "sponges, bivalves, or sea squirts attached to the surface."
        ),
        tags=frozenset({"slime-vs-macro"}),
    ),
    GuidelineChunk(
        id="boundary-rules",
        text=(
            "Boundary criteria: estimate the percent cover of macrofouling over the visible "
            "surface and apply the thresholds strictly; slime coverage never raises a rating "
            "above LoF 1 unless macrofouling is also present."
        ),
        tags=frozenset({"boundary-criteria"}),
    ),
    GuidelineChunk(
        id="species-watchlist",
        text=(
            "Priority invasive species for New Zealand inspections: Didemnum vexillum, "
            "Sabella spallanzanii, Undaria pinnatifida, Styela clava, and Ciona intestinalis."
        ),
        tags=frozenset({"slime-vs-macro"}),
    ),
)


def chunk_score(query_tokens: frozenset[str], chunk: GuidelineChunk) -> float:
    """Jaccard overlap of token sets plus a per-token tag-match bonus."""
    chunk_tokens = tokenize(chunk.text)
    union = query_tokens | chunk_tokens
    jaccard = len(query_tokens & chunk_tokens) / len(union) if union else 0.0
    tag_tokens = frozenset(token for tag in chunk.tags for token in tag.split("-"))
    return jaccard + _TAG_BONUS * len(query_tokens & tag_tokens)


def retrieve_chunks(
    query: str, store: Sequence[GuidelineChunk], k: int
) -> list[GuidelineChunk]:
    """Top-`k` chunks for the query; `k` beyond the store size returns all."""
    if not store:
        raise ValidationError("chunk store must not be empty")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    query_tokens = tokenize(query)
    ranked = sorted(store, key=lambda c: (-chunk_score(query_tokens, c), c.id))
    return ranked[:k]


def write_chunk_store(chunks: Sequence[GuidelineChunk], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for chunk in chunks:
            fh.write(
                json.dumps(
                    {"id": chunk.id, "text": chunk.text, "tags": sorted(chunk.tags)},
                    sort_keys=True,
                )
                + "\n"
            )


def load_chunk_store(path: str | Path) -> list[GuidelineChunk]:
    path = Path(path)
    chunks = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                chunks.append(
                    GuidelineChunk(id=obj["id"], text=obj["text"], tags=frozenset(obj["tags"]))
                )
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad chunk record: {exc}") from None
    if not chunks:
        raise ValidationError(f"{path}: chunk store is empty")
    return chunks
