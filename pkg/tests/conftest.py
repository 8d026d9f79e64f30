import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: list[tuple[str, bool, str]] = []


class _Recorder:
    def __call__(self, label: str, passed: bool, detail: str = "") -> bool:
        _RESULTS.append((label, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
        return bool(passed)


@pytest.fixture
def record():
    """Log one acceptance line; the lines are repeated in the terminal summary."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
