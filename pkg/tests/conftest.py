"""Shared test helpers and the acceptance-criteria summary block."""

import numpy as np
import pytest

N_CRITERIA = 11
_RESULTS: dict[int, tuple[bool, str]] = {}


def check(criterion: int, passed: bool, detail: str) -> None:
    """Record one acceptance criterion outcome, then assert it."""
    _RESULTS[criterion] = (bool(passed), detail)
    assert passed, f"criterion {criterion}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in range(1, N_CRITERIA + 1):
        if i in _RESULTS:
            ok, detail = _RESULTS[i]
            verdict = "PASS" if ok else "FAIL"
            terminalreporter.write_line(f"[criterion {i:02d}] {verdict} - {detail}")
        else:
            terminalreporter.write_line(f"[criterion {i:02d}] NOT RUN")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
