import numpy as np
import pytest

from grwlab import build_grid, build_model, cat_state, gaussian_packet


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict; lines are echoed in the terminal summary."""
    lines = request.config._acceptance_lines

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64, -8.0, 8.0)


@pytest.fixture(scope="session")
def packet_model(grid64):
    return build_model(grid64, 1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def packet(grid64):
    return gaussian_packet(grid64, 0.0, 1.0, 0.8)


@pytest.fixture(scope="session")
def cat_model(grid64):
    # heavy particle: branches stay put over the run
    return build_model(grid64, 1.0, 1.0, 100.0)


@pytest.fixture(scope="session")
def cat(grid64):
    return cat_state(grid64, -2.0, 2.0, 0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
