from __future__ import annotations

import json
from pathlib import Path

import pytest

from defect_sage.config import ServiceConfig, default_descriptors_path, default_kb_path
from defect_sage.evidence import RecordedSearchClient, RecordedTextAdapter
from defect_sage.knowledge import load_knowledge_base
from defect_sage.session import DiagnosticSession
from defect_sage.vision import RecordedMultimodalAdapter, load_descriptors

DATA_DIR = Path(__file__).parent / "data"

# The timestamp every recorded fixture was captured with; sessions replayed
# against it must use the same clock to stay byte-identical.
FIXED_CLOCK_VALUE = "2026-08-24T00:00:00+00:00"


def fixed_clock() -> str:
    return FIXED_CLOCK_VALUE


@pytest.fixture(scope="session")
def kb():
    return load_knowledge_base(default_kb_path())


@pytest.fixture(scope="session")
def raw_kb_doc() -> dict:
    return json.loads(default_kb_path().read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def descriptors():
    return tuple(load_descriptors(default_descriptors_path()))


@pytest.fixture()
def search_client():
    return RecordedSearchClient.from_file(DATA_DIR / "search_transcript.json")


@pytest.fixture()
def text_adapter():
    return RecordedTextAdapter.from_file(DATA_DIR / "text_transcript.json")


@pytest.fixture()
def vision_adapter():
    return RecordedMultimodalAdapter.from_file(DATA_DIR / "vision_transcript.json")


@pytest.fixture()
def image_bytes():
    def read(name: str) -> bytes:
        return (DATA_DIR / "images" / name).read_bytes()

    return read


def build_wired_session(kb, descriptors, search_client, text_adapter,
                        vision_adapter) -> DiagnosticSession:
    """Session with every collaborator recorded and the clock pinned."""
    config = ServiceConfig(external_retrieval_enabled=True, image_flow_enabled=True)
    return DiagnosticSession(
        kb, config,
        search_client=search_client,
        text_adapter=text_adapter,
        vision_adapter=vision_adapter,
        descriptors=descriptors,
        clock=fixed_clock,
    )


@pytest.fixture()
def wired_session(kb, descriptors, search_client, text_adapter, vision_adapter):
    return build_wired_session(kb, descriptors, search_client, text_adapter,
                               vision_adapter)


@pytest.fixture()
def offline_session(kb):
    return DiagnosticSession(kb, ServiceConfig(), clock=fixed_clock)


# The acceptance gate prints one verdict line per numbered criterion so the
# run summary is scannable without grepping the dot output.
_criterion_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        _criterion_outcomes[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criterion_outcomes):
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(
            _criterion_outcomes[name], _criterion_outcomes[name].upper())
        terminalreporter.write_line(f"{verdict:>4}  {name.removeprefix('test_')}")
