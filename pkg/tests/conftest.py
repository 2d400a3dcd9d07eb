import sys
from pathlib import Path

import pytest

from cordner.store import Store

TESTS = Path(__file__).parent
STUB = TESTS / "stubs" / "stub_tagger.py"

sys.path.insert(0, str(TESTS))


def stub_command(*extra, output=True):
    args = [sys.executable, "-S", str(STUB), "{input}"]
    if output:
        args.append("{output}")
    return " ".join(f'"{a}"' if " " in a else a for a in [*args, *extra])


@pytest.fixture
def store():
    s = Store(":memory:")
    yield s
    s.close()


@pytest.fixture
def db_path(tmp_path):
    return tmp_path / "store.sqlite"


@pytest.fixture(autouse=True)
def _scratch_in_tmp(tmp_path, monkeypatch):
    monkeypatch.setenv("CORDNER_SCRATCH", str(tmp_path / "scratch"))
    monkeypatch.delenv("CORDNER_WORKERS", raising=False)


# acceptance results, printed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line[1])
