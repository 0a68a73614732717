import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy_code():
    from nnbicm.ldpc import load_code
    return load_code("hamming-7-4")


ACCEPTANCE_LINES = []
ACCEPTANCE_NOTES = []


@pytest.fixture(scope="session")
def verdict():
    """Record one pass/fail line per acceptance criterion, then assert it."""
    def record(n, passed, detail):
        line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
    return record


@pytest.fixture(scope="session")
def note():
    """Diagnostic line shown under the criteria in the terminal summary."""
    def record(line):
        ACCEPTANCE_NOTES.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES or ACCEPTANCE_NOTES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
        for line in ACCEPTANCE_NOTES:
            terminalreporter.write_line(line)
