from __future__ import annotations

import pytest

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request, capsys):
    """Record one PASS/FAIL line per acceptance criterion.

    Lines are printed as the criterion finishes and again, together, in the
    terminal summary.
    """
    lines = request.config.stash[_ACCEPTANCE]

    def record(number, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
