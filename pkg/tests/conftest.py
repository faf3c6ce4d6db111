import numpy as np
import pytest

from noisy_meta.episodes import generate_benchmark


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_benchmark():
    return generate_benchmark(8, 6, 6, 8.0, 0.5, 30, 3)


_CRITERIA = []


def pytest_runtest_makereport(item, call):
    if call.when != "call":
        return
    for name, value in item.user_properties:
        if name == "criterion":
            _CRITERIA.append((value, call.excinfo is None))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for text, ok in sorted(_CRITERIA, key=lambda c: int(c[0].split(":")[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {text}")
