import numpy as np
import pytest


@pytest.fixture
def linear_path():
    from rbnlab.paths import SamplePath

    return SamplePath.from_values(np.linspace(0.0, 1.0, 1025))


ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; printed again in the terminal summary."""

    def emit(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}" + (f" | {detail}" if detail else "")
        ACCEPTANCE.append((number, line))
        print(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
