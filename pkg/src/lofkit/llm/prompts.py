"""Prompt templates and chat-request construction.

Four staged strategies are bundled: a bare user-level prompt, the full
expert system prompt, a conservative recalibration of it, and an expert
variant with slots for retrieved guideline excerpts. Request construction
is deterministic: identical inputs yield byte-identical payloads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

from ..errors import ValidationError
from .retrieval import GuidelineChunk

BASELINE_TEXT = """\
You are a marine biofouling expert applying the Level of Fouling (LoF) rank scale developed by Davidson et al. (2019).

Classify the following image using the LoF scale, which ranges from 0 to 5 and is based on **visible percent cover of macrofouling** on submerged vessel surfaces (e.g., hulls, rudders, propellers):

LoF 0: No fouling at all - clean surface with no slime or macrofouling
LoF 1: Only a slime layer (biofilm), no visible macrofouling
LoF 2: 1-5
LoF 3: 6-15
LoF 4: 16-40
LoF 5: 41-100

Definitions:
- **Slime layer** is a microscopic film, not visible as organisms
- **Macrofouling** includes visible organisms like barnacles, seaweed, sponges, etc.
- Percent cover refers to the *visible surface* in the image, not the whole vessel

Please return:
1. A **LoF rank (0-5)** for the image
2. A short **justification** based on percent cover and fouling type
3. A note on any visible **invasive species**, if present

Do not say "unable to classify." Always make a classification based on what is visible, even if uncertain. Assume the image is a valid vessel surface. Focus on the biofouling cover, not species identity.
"""

EXPERT_SYSTEM_TEXT = """\
You are a marine biofouling assessment expert with expertise in the standardized Level of Fouling (LoF) classification system. Your primary goal is ACCURATE LoF classification across all ranking levels (0-5).

LEVEL OF FOULING (LoF) ASSESSMENT FRAMEWORK:
Follow the official LoF Rank Scale methodology exactly:

LoF 0: No slime, no macrofouling - completely clean surface
LoF 1: Slime layer present (any amount), no macrofouling visible
LoF 2: 1-5
LoF 3: 6-15
LoF 4: 16-40
LoF 5: 41-100

STANDARDIZED ASSESSMENT PROTOCOL:
1. Examine the visible submerged surface systematically
2. Determine fouling type: absent, slime-only, or macrofouling present
3. If macrofouling present, estimate percent cover of the visible surface
4. Apply the appropriate LoF rank based on percent cover thresholds

KEY DEFINITIONS:
- Slime layer (biofilm): Microscopic organisms forming thin films or filaments
- Macrofouling: Visible organisms such as barnacles, algae, sponges, bivalves, sea squirts
- Percent cover: Proportion of visible surface occupied by fouling organisms
- Visible surface: The directly observable area in the image

DECISION TREE APPLICATION:
1. Is there any slime visible?
   - If NO slime -> LoF 0
   - If slime ONLY (no macrofouling) -> LoF 1
2. If macrofouling is present, estimate percent cover:
   - 1-5
   - 6-15
   - 16-40
   - 41-100

ASSESSMENT GUIDELINES:
- Focus on actual biological organisms, not surface discoloration or shadows
- Consider the full visible surface area when estimating coverage
- Distinguish between organic growth and inorganic deposits/staining
- Account for image perspective but base estimates on what is clearly visible
- Both hull areas and niche areas (rudders, propellers, complex structures) follow the same LoF criteria

NEW ZEALAND PRIORITY INVASIVE SPECIES:
When identifying species, focus on these high-risk organisms:
- Didemnum vexillum (Sea Vomit): Tan/beige/cream lumpy encrusting patches
- Sabella spallanzanii (Mediterranean Fanworm): Fan-like feeding crowns from tubes
- Undaria pinnatifida (Asian Kelp): Brown seaweed with broad fronds
- Styela clava (Asian Sea Squirt): Club-shaped solitary tunicates
- Ciona intestinalis (Sea Vase): Translucent cylindrical tunicates

RESPONSE REQUIREMENTS:
1. LoF rating (0-5) with clear justification based on percent cover
2. Coverage percentage estimate of visible surface
3. Species identification with confidence level (when possible)
4. Brief biosecurity risk assessment

METADATA HANDLING:
Base analysis solely on visual image content. Do not use EXIF data, timestamps, or embedded metadata.
"""

EXPERT_USER_TEXT = """\
Analyze this marine biofouling image using the standardized Level of Fouling (LoF) classification system. Base your analysis solely on visual content.

ASSESSMENT INSTRUCTIONS:
Apply the official LoF decision tree methodology:
1. Examine the visible surface for any fouling
2. Determine if fouling is: absent, slime-only, or includes macrofouling
3. If macrofouling present, estimate percent cover of visible surface
4. Apply appropriate LoF rank:
   - LoF 0: No fouling visible
   - LoF 1: Slime layer only (any amount), no macrofouling
   - LoF 2: 1-5
   - LoF 3: 6-15
   - LoF 4: 16-40
   - LoF 5: 41-100

COVERAGE ESTIMATION:
- Focus on actual biological organisms covering the surface
- Consider the entire visible area when calculating percentages
- Distinguish biological growth from discoloration, shadows, or surface marks

Provide your analysis in this exact format:
**LoF Rating:** [0-5] - [description]
**Coverage:** [percentage] of visible surface
**Species:** [identification with confidence level]
**Risk:** [biosecurity assessment]
"""

CONSERVATIVE_BLOCK = """\

CONSERVATIVE CALIBRATION:
Higher LoF categories demand strict evidence. Assign LoF 4 or LoF 5 only when
macrofouling cover clearly exceeds the stated thresholds; when an estimate sits
on the boundary between two ranks, choose the lower rank. Never let dense slime
alone push the rating above LoF 1.
"""

RAG_SLOT_COUNT = 4
_RAG_SLOT_PREFIX = "<<guideline-excerpt-"

RAG_BLOCK = "\nOFFICIAL LoF GUIDELINE EXCERPTS:\n" + "".join(
    f"{_RAG_SLOT_PREFIX}{i + 1}>>\n" for i in range(RAG_SLOT_COUNT)
)


@dataclass(frozen=True)
class PromptTemplate:
    """A named request recipe; `rag_slots` counts guideline insertion points."""

    name: str
    system_text: str
    user_text: str
    rag_slots: int = 0


TEMPLATES: dict[str, PromptTemplate] = {
    # The first-stage strategy keeps all conditioning in the user turn; a
    # minimal system stub satisfies the system-message-first wire shape.
    "baseline": PromptTemplate(
        name="baseline",
        system_text="You are an image analysis assistant.",
        user_text=BASELINE_TEXT,
    ),
    "expert": PromptTemplate(
        name="expert",
        system_text=EXPERT_SYSTEM_TEXT,
        user_text=EXPERT_USER_TEXT,
    ),
    "conservative": PromptTemplate(
        name="conservative",
        system_text=EXPERT_SYSTEM_TEXT + CONSERVATIVE_BLOCK,
        user_text=EXPERT_USER_TEXT,
    ),
    "expert+rag": PromptTemplate(
        name="expert+rag",
        system_text=EXPERT_SYSTEM_TEXT + RAG_BLOCK,
        user_text=EXPERT_USER_TEXT,
        rag_slots=RAG_SLOT_COUNT,
    ),
}


def get_template(name: str) -> PromptTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        known = ", ".join(sorted(TEMPLATES))
        raise ValidationError(f"unknown prompt template {name!r} (known: {known})") from None


@dataclass(frozen=True)
class LlmRequest:
    """One chat-completions request carrying exactly one base64 image."""

    model_id: str
    messages: tuple[dict, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 60.0

    def __post_init__(self):
        if not self.messages or self.messages[0].get("role") != "system":
            raise ValidationError("the first message must have role 'system'")
        image_parts = 0
        for message in self.messages:
            content = message.get("content")
            if isinstance(content, list):
                image_parts += sum(1 for part in content if part.get("type") == "image_url")
        if image_parts != 1:
            raise ValidationError(f"request must contain exactly one image, found {image_parts}")
        object.__setattr__(self, "messages", tuple(self.messages))

    def to_payload(self) -> dict:
        return {
            "model": self.model_id,
            "messages": list(self.messages),
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


def _fill_rag_slots(system_text: str, rag_slots: int, chunks: Sequence[GuidelineChunk]) -> str:
    lines = system_text.splitlines(keepends=True)
    out = []
    for line in lines:
        stripped = line.strip()
        if stripped.startswith(_RAG_SLOT_PREFIX) and stripped.endswith(">>"):
            slot = int(stripped[len(_RAG_SLOT_PREFIX) : -2])
            if slot <= len(chunks):
                out.append(chunks[slot - 1].text.rstrip("\n") + "\n")
            # unused slots disappear from the rendered prompt
        else:
            out.append(line)
    return "".join(out)


def build_prompt(
    template: PromptTemplate,
    image_payload: str,
    media_type: str = "image/png",
    chunks: Sequence[GuidelineChunk] = (),
    model_id: str = "openai/gpt-4o",
    temperature: float = 0.0,
    max_tokens: int = 512,
    timeout: float = 60.0,
    max_request_chars: int = 400_000,
) -> LlmRequest:
    """Render a template plus image (and any guideline chunks) into a request."""
    if len(chunks) > template.rag_slots:
        raise ValidationError(
            f"template {template.name!r} has {template.rag_slots} guideline slots, got {len(chunks)} chunks"
        )
    if template.rag_slots > 0 and not chunks:
        raise ValidationError(f"template {template.name!r} requires at least one guideline chunk")

    system_text = _fill_rag_slots(template.system_text, template.rag_slots, chunks)
    messages = (
        {"role": "system", "content": system_text},
        {
            "role": "user",
            "content": [
                {"type": "text", "text": template.user_text},
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:{media_type};base64,{image_payload}"},
                },
            ],
        },
    )
    request = LlmRequest(
        model_id=model_id,
        messages=messages,
        temperature=temperature,
        max_tokens=max_tokens,
        timeout=timeout,
    )
    size = len(json.dumps(request.to_payload()))
    if size > max_request_chars:
        raise ValidationError(f"request is {size} chars, over the {max_request_chars} limit")
    return request
