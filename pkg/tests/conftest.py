"""Shared fixtures: the catalog models are cheap to build but their radial
profiles are cached per instance, so one instance per session keeps the
suite fast."""

import sys

import numpy as np
import pytest
from hypothesis import settings

from zsc.immersion.models import circle_cylinder, graph, schwarzschild

settings.register_profile("zsc", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("zsc")


@pytest.fixture(scope="session")
def schw():
    return schwarzschild()


@pytest.fixture(scope="session")
def circle():
    return circle_cylinder()


@pytest.fixture(scope="session")
def quad_graph():
    return graph("quadratic")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def circle_of_constraint(theta):
    """Exact parametrization of {R = 0} on the unit sphere with H = 1.

    The set is the circle cut from the sphere by the plane l1 + l2 + l3 = 1.
    """
    theta = np.asarray(theta, dtype=float)
    e1 = np.array([1.0, -1.0, 0.0]) / np.sqrt(2.0)
    e2 = np.array([1.0, 1.0, -2.0]) / np.sqrt(6.0)
    rad = np.sqrt(2.0 / 3.0)
    return np.full(3, 1.0 / 3.0) + rad * (np.cos(theta)[..., None] * e1 + np.sin(theta)[..., None] * e2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
