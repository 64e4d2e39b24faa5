import numpy as np
import pytest

from dyadic_lab import GridSpec, StepFunction


def brute_inner(f, g, w=None):
    """Cell-by-cell quadrature, independent of the Z-order machinery."""
    wv = np.ones_like(f.values) if w is None else w.values
    return float(np.sum(f.values * g.values * wv) / f.values.size)


def brute_average(f, I):
    """Mean over ``I`` by scanning every lexicographic cell centre."""
    grid = f.grid
    n = 1 << grid.R
    coords = (np.indices((n,) * grid.d).reshape(grid.d, -1).T + 0.5) / n
    lo = np.array(I.pos) * 2.0 ** -I.level
    inside = np.all((coords >= lo) & (coords < lo + 2.0 ** -I.level), axis=1)
    return float(f.values[inside].mean())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid1():
    return GridSpec(1, 5, 7)


@pytest.fixture
def grid2():
    return GridSpec(2, 3, 5)


def random_step(grid, rng, level=None):
    return StepFunction.random(grid, rng, level)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list = []


def record_acceptance(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
