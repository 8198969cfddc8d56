import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gaudin import build_system

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.differing_executors],
)
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


def random_field(rng, min_perp=0.1):
    while True:
        b = rng.normal(size=3)
        if np.hypot(b[0], b[1]) >= min_perp:
            return tuple(float(x) for x in b)


def random_system(rng, n, min_perp=0.1, min_gap=0.0):
    while True:
        eps = rng.uniform(0.0, n, n)
        if n == 1 or np.diff(np.sort(eps)).min() > max(min_gap, 1e-9):
            return build_system(eps, random_field(rng, min_perp))


@pytest.fixture(scope="session")
def oracles():
    return json.loads((DATA / "oracles.json").read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Append one ``PASS``/``FAIL`` line per acceptance criterion; echoed at the end of the run."""

    def record(line: str) -> None:
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
