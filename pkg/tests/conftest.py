import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``with criterion("3 null calibration") as note: ...; note("detail")``.
    """

    class _Recorder:
        def __init__(self):
            self.name = None
            self.details = []

        def __call__(self, name):
            self.name = name
            return self

        def __enter__(self):
            return self.details.append

        def __exit__(self, exc_type, exc, tb):
            status = "PASS" if exc_type is None else "FAIL"
            detail = "; ".join(self.details)
            line = f"[{status}] criterion {self.name}" + (f" ({detail})" if detail else "")
            _ACCEPTANCE_LINES.append(line)
            print(line)
            return False

    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
