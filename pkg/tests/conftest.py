import numpy as np
import pytest

from chcontrol import Geometry, PotentialPair, PotentialSpec, SolverConfig


@pytest.fixture
def line():
    return Geometry("Interval1D", 33)


@pytest.fixture
def strip():
    return Geometry("Strip2D", 16, 9, 1.0, 0.5)


@pytest.fixture(params=["Interval1D", "Strip2D"])
def geom(request):
    if request.param == "Interval1D":
        return Geometry("Interval1D", 33)
    return Geometry("Strip2D", 16, 9, 1.0, 0.5)


def make_pair(kind):
    return PotentialPair(PotentialSpec(kind), PotentialSpec(kind))


def smooth_y0(geom, mean=0.1, amp=0.3):
    return geom.bulk_from_function(lambda x, *y: mean + amp * np.cos(2 * np.pi * x / geom.lx))


def wave_control(geom, cfg, amp=0.4):
    t = cfg.times[:, None]
    return amp * np.sin(3 * t) * np.ones(geom.nb)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store the one-line outcome of an acceptance criterion for the summary."""
    def _record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
