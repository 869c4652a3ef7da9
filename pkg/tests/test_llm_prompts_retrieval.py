import json

import pytest

from lofkit.errors import ValidationError
from lofkit.llm.prompts import TEMPLATES, build_prompt, get_template
from lofkit.llm.retrieval import (
    DEFAULT_CHUNKS,
    GuidelineChunk,
    chunk_score,
    load_chunk_store,
    retrieve_chunks,
    tokenize,
    write_chunk_store,
)


class TestTemplates:
    def test_registry_names(self):
        assert set(TEMPLATES) == {"baseline", "expert", "conservative", "expert+rag"}
        with pytest.raises(ValidationError, match="unknown prompt template"):
            get_template("best")

    def test_baseline_contains_refusal_ban(self):
        request = build_prompt(get_template("baseline"), "AAAA")
        user_text = request.messages[1]["content"][0]["text"]
        assert 'Do not say "unable to classify."' in user_text

    def test_expert_contains_role_framing(self):
        request = build_prompt(get_template("expert"), "AAAA")
        assert "You are a marine biofouling assessment expert" in request.messages[0]["content"]

    def test_all_templates_demand_an_integer_rating(self):
        for template in TEMPLATES.values():
            text = template.system_text + template.user_text
            assert "LoF" in text
            assert "0-5" in text or "(0-5)" in text

    def test_expert_variants_share_role_framing(self):
        for name in ("expert", "conservative", "expert+rag"):
            assert "You are a marine biofouling assessment expert" in TEMPLATES[name].system_text

    def test_conservative_prefers_lower_rank_on_boundary(self):
        assert "choose the lower rank" in TEMPLATES["conservative"].system_text


class TestBuildPrompt:
    def test_rag_chunk_inserted_verbatim(self):
        chunk = GuidelineChunk(id="c", text="LoF 2: 1-5", tags=frozenset({"scale-definition"}))
        request = build_prompt(get_template("expert+rag"), "AAAA", chunks=[chunk])
        system = request.messages[0]["content"]
        assert "LoF 2: 1-5" in system
        assert "<<guideline-excerpt-" not in system

    def test_rag_template_requires_chunks(self):
        with pytest.raises(ValidationError, match="at least one guideline chunk"):
            build_prompt(get_template("expert+rag"), "AAAA")

    def test_chunk_overflow_rejected(self):
        chunk = GuidelineChunk(id="c", text="x", tags=frozenset({"scale-definition"}))
        with pytest.raises(ValidationError, match="slots"):
            build_prompt(get_template("expert"), "AAAA", chunks=[chunk])
        with pytest.raises(ValidationError, match="slots"):
            build_prompt(get_template("expert+rag"), "AAAA", chunks=[chunk] * 5)

    def test_deterministic_bytes(self):
        chunk = GuidelineChunk(id="c", text="LoF 3: 6-15", tags=frozenset({"boundary-criteria"}))
        a = build_prompt(get_template("expert+rag"), "PAYLOAD", chunks=[chunk])
        b = build_prompt(get_template("expert+rag"), "PAYLOAD", chunks=[chunk])
        assert json.dumps(a.to_payload()) == json.dumps(b.to_payload())

    def test_wire_shape(self):
        request = build_prompt(get_template("expert"), "AAAA", media_type="image/jpeg")
        assert request.messages[0]["role"] == "system"
        image_part = request.messages[1]["content"][1]
        assert image_part["type"] == "image_url"
        assert image_part["image_url"]["url"].startswith("data:image/jpeg;base64,AAAA")

    def test_oversized_request_rejected(self):
        with pytest.raises(ValidationError, match="over the"):
            build_prompt(get_template("expert"), "A" * 10_000, max_request_chars=9_000)


class TestRetrieval:
    def test_singleton_store(self):
        chunk = GuidelineChunk(id="only", text="anything", tags=frozenset({"scale-definition"}))
        assert retrieve_chunks("whatever", [chunk], k=1) == [chunk]

    def test_hand_computed_ranking(self):
        # query tokens: {macrofouling, percent, cover, thresholds}
        boundary = GuidelineChunk(
            id="b",
            # tokens: {apply, percent, cover, thresholds, for, macrofouling}
            text="apply percent cover thresholds for macrofouling",
            tags=frozenset({"boundary-criteria"}),
        )
        species = GuidelineChunk(
            id="s",
            # tokens: {didemnum, vexillum, is, an, invasive, species}
            text="Didemnum vexillum is an invasive species",
            tags=frozenset({"slime-vs-macro"}),
        )
        query = "macrofouling percent cover thresholds"
        q = tokenize(query)
        # boundary: overlap 4 / union 6 = 0.667, no tag-token match
        assert chunk_score(q, boundary) == pytest.approx(4 / 6)
        # species: overlap 0 / union 10 = 0, no tag-token match
        assert chunk_score(q, species) == 0.0
        assert retrieve_chunks(query, [species, boundary], k=2) == [boundary, species]

    def test_tag_bonus_counts_matching_query_tokens(self):
        chunk = GuidelineChunk(id="t", text="unrelated words", tags=frozenset({"boundary-criteria"}))
        score = chunk_score(tokenize("boundary criteria please"), chunk)
        assert score == pytest.approx(0.05 * 2)

    def test_ties_break_on_lower_id(self):
        a = GuidelineChunk(id="a", text="same text", tags=frozenset({"scale-definition"}))
        b = GuidelineChunk(id="b", text="same text", tags=frozenset({"scale-definition"}))
        assert retrieve_chunks("same text", [b, a], k=2) == [a, b]

    def test_k_beyond_store_returns_all(self):
        assert len(retrieve_chunks("x", DEFAULT_CHUNKS, k=100)) == len(DEFAULT_CHUNKS)

    def test_k_and_store_validation(self):
        with pytest.raises(ValidationError, match="empty"):
            retrieve_chunks("x", [], k=1)
        with pytest.raises(ValidationError, match=">= 1"):
            retrieve_chunks("x", DEFAULT_CHUNKS, k=0)

    def test_default_store_ranks_boundary_chunk_over_species(self):
        ranked = retrieve_chunks(
            "macrofouling percent cover thresholds", DEFAULT_CHUNKS, k=len(DEFAULT_CHUNKS)
        )
        positions = {chunk.id: i for i, chunk in enumerate(ranked)}
        assert positions["boundary-rules"] < positions["species-watchlist"]

    def test_store_file_round_trip(self, tmp_path):
        path = tmp_path / "chunks.jsonl"
        write_chunk_store(DEFAULT_CHUNKS, path)
        loaded = load_chunk_store(path)
        assert loaded == list(DEFAULT_CHUNKS)

    def test_chunk_validation(self):
        with pytest.raises(ValidationError, match="empty text"):
            GuidelineChunk(id="x", text="  ", tags=frozenset({"scale-definition"}))
        with pytest.raises(ValidationError, match="no tags"):
            GuidelineChunk(id="x", text="t", tags=frozenset())
        with pytest.raises(ValidationError, match="unknown tags"):
            GuidelineChunk(id="x", text="t", tags=frozenset({"vibes"}))
