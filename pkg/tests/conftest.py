from pathlib import Path

import numpy as np
import pytest

from uwsbl import Scenario

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

LINE_ARRAY = np.array([[150, -250, 10], [50, -250, 15], [-50, -250, 20], [-150, -250, 25]], float)
LINE_SOURCE = np.array([100.5976, 250.5837, 30.1131])

SQUARE_ARRAY = np.array([[150, -175, 20], [75, -225, 20], [-50, -200, 20], [-150, -150, 20]], float)
SQUARE_SOURCE = np.array([200.7240, 100.1661, 30.6374])


def line_array_scenario(N=100, kappa_b=0.85):
    return Scenario(LINE_ARRAY, 100.0, 1535.0, 1e-3, N, kappa_b)


def square_array_scenario(N=30):
    return Scenario(SQUARE_ARRAY, 100.0, 1500.0, 1e-3, N, 1.0)


@pytest.fixture
def line_scenario():
    return line_array_scenario()


@pytest.fixture
def square_scenario():
    return square_array_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_scenario(rng, N=16, L=3, h=100.0, kappa_b=0.9, T_s=1e-3):
    rx = np.column_stack([rng.uniform(-200, 200, L), rng.uniform(-200, 200, L), rng.uniform(5, h - 5, L)])
    return Scenario(rx, h, 1500.0, T_s, N, kappa_b)


def interior_point(rng, scenario, spread=200.0):
    h = scenario.bottom_depth
    return np.array([rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(0.1 * h, 0.9 * h)])


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    """Log one acceptance criterion; the lines are echoed in the terminal summary."""
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
