from __future__ import annotations

import pytest

from functree.gateway import LlmGateway, MockBackend, TranscriptWriter
from functree.sandbox import SandboxExecutor

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.skipped:
        _ACCEPTANCE_RESULTS[name] = "SKIP"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{outcome}  {name}")


@pytest.fixture(scope="session")
def executor() -> SandboxExecutor:
    return SandboxExecutor(max_workers=8)


@pytest.fixture()
def transcript(tmp_path):
    """Writer plus a loader for the transcript it produced."""
    path = tmp_path / "transcript.jsonl"
    writer = TranscriptWriter(path)

    def gateway(max_concurrency: int = 4) -> LlmGateway:
        return LlmGateway(MockBackend(path), max_concurrency=max_concurrency)

    return writer, gateway
