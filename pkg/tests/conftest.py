import numpy as np
import pytest

from nehari_lab.solver import initial_states

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])


def smooth_random_states(grid, k, count, seed):
    """Positive smooth states: random Gaussian bumps times a boundary cutoff, random amplitudes."""
    rng = np.random.default_rng(seed)
    starts = initial_states(grid, k, count + 2, seed)[2:]
    return [rng.uniform(0.2, 3.0, size=(k, 1)) * s for _, s in starts]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def generic_smooth_fields(grid, k, count, seed, bumps=3):
    """Positive smooth states with no reflection symmetry: each component sums several random bumps."""
    rng = np.random.default_rng([seed, 99])
    parts = smooth_random_states(grid, k, count * bumps, seed)
    return [sum(rng.uniform(0.2, 1.0) * parts[i * bumps + j] for j in range(bumps)) for i in range(count)]
