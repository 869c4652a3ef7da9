import json
import logging

import pytest

from lofkit.errors import EndpointError
from lofkit.llm.batch import classification_rate, load_journal, run_batch, scored_from_results
from lofkit.llm.client import EndpointConfig, submit
from lofkit.llm.mockserver import (
    ReplayEntry,
    image_key_for_file,
    load_script,
    run_mock_server,
    write_script,
)
from lofkit.llm.prompts import build_prompt, get_template


@pytest.fixture
def simple_request():
    return build_prompt(get_template("expert"), "UElORw==")


class TestSubmit:
    def test_passthrough_completion(self, simple_request):
        entries = [ReplayEntry(content="**LoF Rating:** 2 - sparse")]
        with run_mock_server(entries) as base_url:
            raw = submit(simple_request, EndpointConfig(base_url=base_url))
        assert raw == "**LoF Rating:** 2 - sparse"

    def test_retries_on_429_then_succeeds(self, simple_request):
        entries = [
            ReplayEntry(status=429),
            ReplayEntry(status=429),
            ReplayEntry(content="ok after retries"),
        ]
        delays = []
        with run_mock_server(entries) as base_url:
            raw = submit(simple_request, EndpointConfig(base_url=base_url), sleep=delays.append)
        assert raw == "ok after retries"
        assert delays == [0.5, 1.0]  # exponential backoff, base 0.5

    def test_exhausts_attempts_on_500(self, simple_request):
        entries = [ReplayEntry(status=500)] * 4
        with run_mock_server(entries) as base_url:
            with pytest.raises(EndpointError, match="after 3 attempts"):
                submit(simple_request, EndpointConfig(base_url=base_url), sleep=lambda _: None)

    def test_non_retryable_status_fails_fast(self, simple_request):
        entries = [ReplayEntry(status=404), ReplayEntry(content="never served")]
        calls = []
        with run_mock_server([ReplayEntry(status=403)]) as base_url:
            with pytest.raises(EndpointError, match="HTTP 403"):
                submit(simple_request, EndpointConfig(base_url=base_url), sleep=calls.append)
        assert calls == []

    def test_credential_never_logged(self, simple_request, caplog, monkeypatch):
        secret = "sk-SUPERSECRET-42"
        monkeypatch.setenv("LOFKIT_API_KEY", secret)
        entries = [ReplayEntry(status=429), ReplayEntry(content="done")]
        with caplog.at_level(logging.DEBUG, logger="lofkit.llm.client"):
            with run_mock_server(entries) as base_url:
                submit(simple_request, EndpointConfig(base_url=base_url), sleep=lambda _: None)
        assert caplog.records
        for record in caplog.records:
            assert secret not in record.getMessage()


def _tiny_dataset(tmp_path, n=3):
    from lofkit.synth import generate_dataset

    counts = [0, 0, 0, 0, 0, 0]
    for i in range(n):
        counts[(i % 5) + 1] += 1
    manifest = generate_dataset(counts, tmp_path, seed=21, width=24, height=24)
    return manifest


class TestRunBatch:
    def test_results_follow_manifest_order(self, tmp_path):
        manifest = _tiny_dataset(tmp_path, n=3)
        ratings = [1, 1, 5]
        entries = [
            ReplayEntry(
                key=image_key_for_file(tmp_path / record.path),
                content=f"**LoF Rating:** {rating} - scripted",
            )
            for record, rating in zip(manifest.records, ratings)
        ]
        with run_mock_server(entries) as base_url:
            results = run_batch(
                manifest,
                get_template("expert"),
                EndpointConfig(base_url=base_url),
                tmp_path / "journal.jsonl",
                images_root=tmp_path,
                concurrency=3,
            )
        assert [image_id for image_id, _ in results] == list(manifest.ids())
        assert [a.rank for _, a in results] == ratings
        assert classification_rate(results) == 1.0

    def test_failure_is_isolated_to_one_image(self, tmp_path):
        manifest = _tiny_dataset(tmp_path, n=3)
        keys = [image_key_for_file(tmp_path / r.path) for r in manifest.records]
        entries = [
            ReplayEntry(key=keys[0], content="**LoF Rating:** 2 - ok"),
            # no entry for image 2: the server answers 404 and the client
            # records an unclassified result with the error noted
            ReplayEntry(key=keys[2], content="**LoF Rating:** 4 - ok"),
        ]
        with run_mock_server(entries) as base_url:
            results = run_batch(
                manifest,
                get_template("expert"),
                EndpointConfig(base_url=base_url),
                tmp_path / "journal.jsonl",
                images_root=tmp_path,
                concurrency=1,
            )
        statuses = [a.status for _, a in results]
        assert statuses == ["classified", "unclassified", "classified"]
        assert results[1][1].error is not None

    def test_rerun_skips_journaled_ids(self, tmp_path):
        manifest = _tiny_dataset(tmp_path, n=3)
        entries = [
            ReplayEntry(
                key=image_key_for_file(tmp_path / record.path),
                content="**LoF Rating:** 3 - scripted",
            )
            for record in manifest.records
        ]
        journal = tmp_path / "journal.jsonl"
        with run_mock_server(entries) as base_url:
            endpoint = EndpointConfig(base_url=base_url)
            run_batch(manifest, get_template("expert"), endpoint, journal,
                      images_root=tmp_path, concurrency=2)
            # rerun against a server with no keyed entries left for these
            # images; journaled ids must not be re-submitted
        with run_mock_server([ReplayEntry(status=500)]) as base_url:
            results = run_batch(
                manifest, get_template("expert"), EndpointConfig(base_url=base_url),
                journal, images_root=tmp_path, concurrency=2,
            )
        assert all(a.rank == 3 for _, a in results)

    def test_journal_round_trip(self, tmp_path):
        manifest = _tiny_dataset(tmp_path, n=2)
        entries = [
            ReplayEntry(
                key=image_key_for_file(tmp_path / record.path),
                content=f"**LoF Rating:** {rank} - x\n**Coverage:** 7% of visible surface",
            )
            for record, rank in zip(manifest.records, (2, 5))
        ]
        journal = tmp_path / "journal.jsonl"
        with run_mock_server(entries) as base_url:
            results = run_batch(manifest, get_template("expert"),
                                EndpointConfig(base_url=base_url), journal,
                                images_root=tmp_path)
        reloaded = load_journal(journal)
        assert {image_id: a for image_id, a in results} == reloaded

    def test_scored_conversion(self):
        from lofkit.llm.parse import ParsedAssessment

        results = [
            ("a", ParsedAssessment(status="classified", rank=4)),
            ("b", ParsedAssessment(status="unclassified")),
        ]
        scored = scored_from_results(results)
        assert scored[0].top1 == 4 and scored[1].top1 is None
        assert classification_rate(results) == 0.5


class TestScriptFile:
    def test_script_round_trip(self, tmp_path):
        entries = [
            ReplayEntry(content="hello", status=200, key="abc"),
            ReplayEntry(status=429),
        ]
        write_script(entries, tmp_path / "script.jsonl")
        assert load_script(tmp_path / "script.jsonl") == entries
