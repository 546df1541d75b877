import numpy as np
import pytest

from skyrmelab import evolution, profile, variational


@pytest.fixture(scope="session")
def solved():
    return profile.solve_profile()


@pytest.fixture(scope="session")
def minimized():
    grid = variational.variational_grid(1024)
    return variational.minimize_J(grid.sample(lambda r: 1.0 - r * r))


@pytest.fixture(scope="session")
def runs(solved):
    """Evolutions of the solved profile at two resolutions (h and h/2)."""
    return {n: evolution.evolve(solved, n=n, t_end=-0.05, snapshot_times=(-0.5, -0.25))
            for n in (4096, 8192)}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    def record(number: int, label: str, value: float, limit: str, ok: bool) -> None:
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {label}: {value:.6g} (limit {limit})"
        ACCEPTANCE.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
