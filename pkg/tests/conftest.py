import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; call it before asserting so failures print too."""

    def record(number, title, passed, detail):
        _ACCEPTANCE.append((number, title, bool(passed), detail))
        return passed

    return record


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("CPHASEGATE_CACHE_DIR", str(tmp_path / "cache"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        tr.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
