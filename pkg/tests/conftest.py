import os
from pathlib import Path

import pytest

from ldpkatz.protocol import CEILING_AUDIT

_RESULTS = {}


def pytest_collection_modifyitems(config, items):
    # acceptance runs last so the clip-ceiling audit covers every other test first
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")


@pytest.fixture
def record():
    """Record one acceptance line: record("AC4", passed, "detail")."""

    def _record(name, passed, detail=""):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        _RESULTS[name] = f"{name} {status} {detail}".rstrip()
        print(_RESULTS[name])

    return _record


@pytest.fixture(scope="session", autouse=True)
def ceiling_audit():
    yield CEILING_AUDIT
    assert CEILING_AUDIT["violations"] == 0, f"clip ceiling violated: {CEILING_AUDIT}"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: [int(p) if p.isdigit() else p for p in _split(k)]):
        terminalreporter.write_line(_RESULTS[key])
    terminalreporter.write_line(
        f"clip-ceiling audit: {CEILING_AUDIT['runs']} clipped runs checked, "
        f"{CEILING_AUDIT['violations']} violations"
    )


def _split(key):
    import re

    return [p for p in re.split(r"(\d+)", key) if p]


@pytest.fixture(scope="session")
def snap_dir():
    d = os.environ.get("LDPKATZ_SNAP_DIR")
    return Path(d) if d else None
