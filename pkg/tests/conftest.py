"""Collects acceptance verdicts and prints them as one block at the end of the run."""

import pytest

CRITERIA = {
    1: "score normalization",
    2: "calibration oracle",
    3: "demand closed-form agreement",
    4: "determinism under parallelism",
    5: "greedy tit-for-tat",
    6: "learner self-consistency",
    7: "directional reproduction at desk scale",
    8: "symmetry control",
    9: "full-scale feasibility",
}

_verdicts: dict[int, tuple[bool, str]] = {}
_started: set[int] = set()


@pytest.fixture
def verdict():
    """``verdict(k, ok, detail)`` records and prints one PASS/FAIL line."""

    def record(k: int, ok: bool, detail: str) -> bool:
        _verdicts[k] = (ok, detail)
        print(_line(k))
        return ok

    return record


def _line(k: int) -> str:
    if k not in _verdicts:
        return f"FAIL criterion {k} ({CRITERIA[k]}): not evaluated"
    ok, detail = _verdicts[k]
    return f"{'PASS' if ok else 'FAIL'} criterion {k} ({CRITERIA[k]}): {detail}"


def pytest_runtest_setup(item):
    # a criterion whose test starts but never records a verdict still gets a FAIL line
    prefix = "test_criterion_"
    if item.name.startswith(prefix):
        _started.add(int(item.name[len(prefix):].split("_")[0]))


def pytest_terminal_summary(terminalreporter):
    if not _started:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_started):
        terminalreporter.write_line(_line(k))
