import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion, then fail the test if it did not pass."""

    def record(label, ok, detail):
        _RESULTS.append((label, ok, detail))
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
