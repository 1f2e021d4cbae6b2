from __future__ import annotations

import functools

import pytest
from hypothesis import HealthCheck, settings

from stadiumlab import geometry as geo
from stadiumlab import solver as sv

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DOMAINS = {
    "disk": geo.Disk(),
    "stadium": geo.Stadium(),
    "ellipse": geo.Ellipse(),
    "square": geo.unit_square(),
}


@functools.lru_cache(maxsize=None)
def solved(name: str, h: float, problem: str = "normalized") -> sv.ScalarField:
    """Solves are shared across test modules; fields are never mutated by diagnostics."""
    return sv.solve(DOMAINS[name], h, problem)


@pytest.fixture(scope="session")
def solve_cached():
    return solved


# acceptance criteria register their outcome here; the summary hook prints one line each
CRITERIA: dict[int, tuple[bool, str]] = {}


def record(n: int, passed: bool, detail: str) -> None:
    CRITERIA[n] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
