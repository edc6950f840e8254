"""Shared runs. The n = 257 evolutions are computed once per session."""

import numpy as np
import pytest

from mcflab import DatumSpec, LevelFamily, SolverParams, build_datum, evolve, make_grid, two_circles_datum
from mcflab.fixtures import vanishing_sphere

FINE = 257


def circle_datum(n=FINE, hw=2.2, R=1.0):
    return build_datum(DatumSpec("circle", {"R": R}), make_grid((0.0, 0.0), hw, n))


@pytest.fixture(scope="session")
def circle_run():
    return evolve(circle_datum(), SolverParams(T=0.4, frame_dt=0.005))


@pytest.fixture(scope="session")
def circle_family(circle_run):
    return LevelFamily.from_field(circle_run, [0.0, 0.15, 0.3])


@pytest.fixture(scope="session")
def circle_partner_run():
    return evolve(circle_datum() + 0.25, SolverParams(T=0.4, frame_dt=0.005))


@pytest.fixture(scope="session")
def paraboloid_run():
    g = build_datum(DatumSpec("paraboloid"), make_grid((0.0, 0.0), 2.2, FINE))
    return evolve(g, SolverParams(T=0.2, frame_dt=0.01))


@pytest.fixture(scope="session")
def concentric_runs():
    g1, g2 = two_circles_datum(1.0, 2.0, 0.0, make_grid((0.0, 0.0), 3.0, FINE))
    p = SolverParams(T=0.45, frame_dt=0.015)
    return evolve(g1, p), evolve(g2, p)


@pytest.fixture(scope="session")
def lemniscate_run():
    g = build_datum(DatumSpec("lemniscate"), make_grid((0.0, 0.0), 1.5, FINE))
    return evolve(g, SolverParams(T=0.05, frame_dt=0.01))


@pytest.fixture(scope="session")
def sphere_fixture():
    return vanishing_sphere(make_grid((0.0, 0.0), 2.5, FINE))


@pytest.fixture(scope="session")
def small_circle_run():
    """Coarse circle evolution for quick unit tests."""
    return evolve(circle_datum(n=97), SolverParams(T=0.3, frame_dt=0.01))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda l: l.split("]")[0][-2:]):
            terminalreporter.write_line(line)
