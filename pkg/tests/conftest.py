from pathlib import Path

import numpy as np
import pytest

from sdot.cost import QuadraticCost
from sdot.geometry import Rectangle, build_grid, normalize_measure
from sdot.partition import Problem, make_targets

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
SHIPPED = ("symmetric_pair", "k4_quadratic", "reflector_pair")

ACCEPTANCE_LINES = []


def unit_square_problem(points, masses, n, density="1", cost=None):
    grid = build_grid(Rectangle((0.0, 0.0), (1.0, 1.0)), n)
    return Problem(cost or QuadraticCost(), normalize_measure(grid, density), make_targets(points, masses))


@pytest.fixture
def pair_problem():
    return unit_square_problem([[0.25, 0.5], [0.75, 0.5]], [0.5, 0.5], 100)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
