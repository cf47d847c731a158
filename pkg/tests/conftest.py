import numpy as np
import pytest

from convex_billiards.geometry import EllipseParams, circle_support, ellipse_support

from oracles import A, B, R_UNIT


@pytest.fixture(scope="session")
def circle():
    return circle_support(1.0)


@pytest.fixture(scope="session")
def unit_circle():
    return circle_support(R_UNIT)


@pytest.fixture(scope="session")
def ellipse():
    return ellipse_support(EllipseParams(A, B))


@pytest.fixture(scope="session")
def perturbed(ellipse):
    return lambda eps, k=3: ellipse.perturbed([(k, eps, 0.0)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
