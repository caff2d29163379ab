from pathlib import Path

import numpy as np
import pytest

from seedlex import EmbeddingTable

DEMO_DIR = Path(__file__).resolve().parents[1] / "src" / "seedlex" / "data" / "demo"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"

_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        label = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{label}  {name}")


@pytest.fixture
def demo_dir():
    return DEMO_DIR


@pytest.fixture
def tiny_table():
    words = ["good", "bad", "fine", "poor", "meh"]
    vecs = np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.9, 0.1, 0.2],
        [0.1, 0.8, 0.1],
        [0.5, 0.5, 0.7],
    ])
    return EmbeddingTable(words, vecs)
