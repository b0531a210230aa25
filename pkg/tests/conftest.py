import pytest

from ionread.rates import MEASURED_RATES
from ionread.stats import NO_PREP_ERRORS, PrepErrors


@pytest.fixture
def measured():
    return MEASURED_RATES


@pytest.fixture
def prep():
    return PrepErrors()


@pytest.fixture
def no_prep():
    return NO_PREP_ERRORS


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(number, title, ok, detail):
        _ACCEPTANCE[number] = (title, bool(ok), detail)
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")
