import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_LINES = {}


class Recorder:
    def __call__(self, key, ok, detail):
        _LINES[key] = (bool(ok), detail)
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_LINES, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = _LINES[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
