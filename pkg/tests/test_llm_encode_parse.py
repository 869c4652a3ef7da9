import base64
import random
import string

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lofkit.errors import ValidationError
from lofkit.llm.encode import encode_bytes, encode_image
from lofkit.llm.parse import (
    ParsedAssessment,
    format_assessment,
    parse_response,
)


class TestEncode:
    def test_three_bytes_make_four_chars(self, tmp_path):
        path = tmp_path / "tiny.png"
        path.write_bytes(b"abc")
        payload, media_type = encode_image(path)
        assert len(payload) == 4 and "=" not in payload
        assert media_type == "image/png"

    def test_padding_rule(self, tmp_path):
        path = tmp_path / "tiny.jpg"
        path.write_bytes(b"abcd")
        payload, media_type = encode_image(path)
        assert len(payload) == 8 and payload.count("=") == 2
        assert media_type == "image/jpeg"
        path.write_bytes(b"abcde")
        payload, _ = encode_image(path)
        assert len(payload) == 8 and payload.count("=") == 1

    def test_round_trip_random_payloads(self):
        rng = random.Random(0)
        for _ in range(50):
            data = rng.randbytes(rng.randrange(0, 200))
            assert base64.b64decode(encode_bytes(data)) == data

    def test_length_law(self):
        for n in range(0, 30):
            assert len(encode_bytes(bytes(n))) == 4 * ((n + 2) // 3)

    def test_unsupported_format(self, tmp_path):
        path = tmp_path / "img.gif"
        path.write_bytes(b"GIF89a")
        with pytest.raises(ValidationError, match="unsupported image format"):
            encode_image(path)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ValidationError, match="unreadable"):
            encode_image(tmp_path / "missing.png")


class TestParse:
    def test_exact_format(self):
        raw = (
            "**LoF Rating:** 3 - Moderate fouling patches\n"
            "**Coverage:** 10% of visible surface\n"
            "**Species:** barnacles (high confidence)\n"
            "**Risk:** moderate biosecurity concern\n"
        )
        a = parse_response(raw)
        assert a.is_classified and a.rank == 3
        assert a.coverage_pct == 10.0
        assert a.species_note == "barnacles (high confidence)"
        assert a.risk_note == "moderate biosecurity concern"

    def test_refusal_is_unclassified(self):
        a = parse_response("I cannot determine the fouling level.")
        assert a.status == "unclassified" and a.rank is None

    def test_fallback_without_asterisks(self):
        assert parse_response("LoF Rating: 5").rank == 5

    def test_fallback_lof_token(self):
        assert parse_response("This looks like LoF 2 with sparse barnacles.").rank == 2

    def test_bare_leading_integer(self):
        assert parse_response("4").rank == 4
        assert parse_response("  2 - sparse organisms").rank == 2

    def test_out_of_range_guard(self):
        assert parse_response("Rating: 9").status == "unclassified"
        assert parse_response("**LoF Rating:** 10").status == "unclassified"
        assert parse_response("9").status == "unclassified"
        assert parse_response("-1").status == "unclassified"

    def test_first_pattern_wins(self):
        raw = "LoF 5 maybe?\n**LoF Rating:** 1 - slime only\n"
        assert parse_response(raw).rank == 1

    def test_coverage_variants(self):
        assert parse_response("**LoF Rating:** 2\nCoverage: 4.5% approx").coverage_pct == 4.5
        assert parse_response("**LoF Rating:** 2\nCoverage: 450%").coverage_pct is None

    def test_empty_and_whitespace(self):
        assert parse_response("").status == "unclassified"
        assert parse_response("   \n\t ").status == "unclassified"

    def test_fuzz_printable(self):
        rng = random.Random(7)
        alphabet = string.printable
        for _ in range(2000):
            raw = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 120)))
            a = parse_response(raw)
            assert a.status in ("classified", "unclassified")
            if a.is_classified:
                assert 0 <= a.rank <= 5

    @given(st.text(max_size=300))
    def test_fuzz_unicode_total(self, raw):
        a = parse_response(raw)
        assert a.status in ("classified", "unclassified")

    @pytest.mark.parametrize("rank", range(6))
    def test_format_round_trip(self, rank):
        original = ParsedAssessment(
            status="classified", rank=rank, coverage_pct=12.5,
            species_note="none identified", risk_note="low",
        )
        reparsed = parse_response(format_assessment(original))
        assert reparsed.rank == rank
        assert reparsed.coverage_pct == 12.5

    def test_format_requires_classified(self):
        with pytest.raises(ValidationError):
            format_assessment(ParsedAssessment(status="unclassified"))

    def test_classified_needs_valid_rank(self):
        with pytest.raises(ValidationError):
            ParsedAssessment(status="classified", rank=None)
        with pytest.raises(ValidationError):
            ParsedAssessment(status="classified", rank=7)
