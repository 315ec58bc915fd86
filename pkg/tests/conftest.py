import re

import pytest

_CRITERIA: dict[str, tuple[str, str]] = {}


def _order(key: str):
    num, suffix = re.match(r"(\d+)(.*)", key).groups()
    return int(num), suffix


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion: criterion(key, ok, detail)."""

    def record(key: str, ok, detail: str = "") -> None:
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        _CRITERIA[key] = (status, detail)
        print(f"criterion {key}: {status} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for key in sorted(_CRITERIA, key=_order):
        status, detail = _CRITERIA[key]
        terminalreporter.write_line(f"criterion {key:<3} {status:<4} {detail}")
