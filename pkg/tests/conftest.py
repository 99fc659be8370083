import numpy as np
import pytest

from fonspn.filterbank import design_bank


@pytest.fixture(scope="session")
def bank4():
    return design_bank(4, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one acceptance line and fail the test when the criterion is not met."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)
