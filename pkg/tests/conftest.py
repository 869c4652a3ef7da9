"""Shared fixtures and the acceptance-suite summary hook."""

from __future__ import annotations

import time

import pytest

from lofkit import synth

TABLE1_COUNTS = (7, 263, 70, 113, 126, 183)

_acceptance_results: dict[str, str] = {}


@pytest.fixture(scope="session")
def table1_twin(tmp_path_factory):
    """Synthetic 762-record dataset mirroring the reference class counts.

    Returns (dataset dir, manifest, build seconds); built once per session
    and shared by the stats/split/LLM-loopback criteria.
    """
    out_dir = tmp_path_factory.mktemp("table1-twin")
    start = time.perf_counter()
    manifest = synth.generate_dataset(TABLE1_COUNTS, out_dir, seed=11, width=64, height=64)
    elapsed = time.perf_counter() - start
    return out_dir, manifest, elapsed


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in str(report.nodeid):
        return
    name = report.nodeid.split("::")[-1]
    _acceptance_results[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"ACCEPTANCE {name}: {outcome}")
