from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patspec.ingest import ingest_directory  # noqa: E402
from patspec.pipeline import bundled_corpus_dir  # noqa: E402

_ACCEPTANCE: dict[str, tuple[int, str]] = {}
_OUTCOMES: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            _ACCEPTANCE[item.nodeid] = (marker.kwargs.get("number", marker.args[0] if marker.args else 0), marker.kwargs.get("title", ""))


def pytest_runtest_logreport(report):
    if report.nodeid not in _ACCEPTANCE:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _OUTCOMES[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    by_number: dict[int, list[tuple[str, str]]] = {}
    for nodeid, (number, title) in _ACCEPTANCE.items():
        if nodeid in _OUTCOMES:
            by_number.setdefault(number, []).append((title, _OUTCOMES[nodeid]))
    for number in sorted(by_number):
        results = by_number[number]
        ok = all(outcome == "passed" for _, outcome in results)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {results[0][0]}")


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return bundled_corpus_dir()


@pytest.fixture(scope="session")
def corpus_docs(corpus_dir):
    return ingest_directory(corpus_dir, "plain")
