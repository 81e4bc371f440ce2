import pytest

from twoaxis.optimize import sweep_point

ACCEPTANCE_SEED = 0
ACCEPTANCE_TRIALS = 1000

_verdicts: list[tuple[str, bool, str]] = []


class LadderSweep:
    """Optimized sweep points, computed on first request and shared by the session."""

    def __init__(self, trials, seed):
        self.trials = trials
        self.seed = seed
        self._points = {}

    def __getitem__(self, n):
        if n not in self._points:
            self._points[n] = sweep_point(n, self.trials, self.seed)
        return self._points[n]

    def point(self, n):
        return self[n][0]

    def optimization(self, n):
        return self[n][1]


@pytest.fixture(scope="session")
def ladder():
    return LadderSweep(ACCEPTANCE_TRIALS, ACCEPTANCE_SEED)


@pytest.fixture
def verdict():
    """Record one acceptance line, then assert it."""

    def record(label: str, ok: bool, detail: str):
        _verdicts.append((label, bool(ok), detail))
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _verdicts:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
