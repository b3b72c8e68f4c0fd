from __future__ import annotations

import json
from pathlib import Path

import pytest

from hardcatch.core_model import load_world_dir
from hardcatch.executor import CommandExecutor, TreeStore

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "hardcatch" / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"


def golden(name: str) -> dict:
    return json.loads((GOLDEN / name).read_text())


@pytest.fixture
def product_world():
    return load_world_dir(FIXTURES / "product" / "world", strict=True)


@pytest.fixture
def product_store():
    return TreeStore.from_directory(FIXTURES / "product" / "trees")


@pytest.fixture
def product_exec(product_store):
    return CommandExecutor(product_store, FIXTURES, k=2, timeout=30)


# -- acceptance summary -------------------------------------------------------

_acceptance: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): an acceptance criterion")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None or call.when != "call":
        return
    number, title = mark.args
    status = "PASS" if call.excinfo is None else "FAIL"
    _acceptance[number] = (title, status, call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, status, seconds = _acceptance[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}  ({seconds:.2f}s)")
