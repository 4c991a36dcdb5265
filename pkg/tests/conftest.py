import numpy as np
import pytest

from acsf.curve import Ellipse, area, circle, from_fourier, support_of_ellipse
from acsf.flow import evolve


def ellipse_boundary(a, b, m=20001, angle=0.0, center=(0.0, 0.0)):
    """Dense parametrized boundary of an ellipse; the brute-force oracle."""
    s = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
    p = np.stack([a * np.cos(s), b * np.sin(s)], axis=1)
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    return p @ rot.T + np.asarray(center)


def shoelace(points):
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@pytest.fixture(scope="session")
def circle_traj():
    """Unit circle, n=128, evolved to area pi/100."""
    return evolve(circle(1.0, 128), area_floor=np.pi / 100)


@pytest.fixture(scope="session")
def ellipse_traj():
    """Ellipse a=2, b=1/2, n=128, evolved until the area falls by 10x."""
    return evolve(support_of_ellipse(Ellipse.from_axes(2.0, 0.5), 128), area_floor=np.pi / 10)


@pytest.fixture(scope="session")
def trefoil_traj():
    """h = 1 + 0.1 cos 3θ, n=256, evolved to area 1e-3 A0."""
    c = from_fourier([(3, 0.1)], 256)
    return evolve(c, area_floor=1e-3 * area(c))


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(capsys):
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(label, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
