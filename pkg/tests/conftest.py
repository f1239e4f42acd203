import math

import numpy as np
import pytest

from linkcap.core import GainTable, Instance, Link, Params, Point

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_link(i, sx, sy, rx, ry, w=1.0):
    return Link(i, Point(sx, sy), Point(rx, ry), w)


def colocated(n, length=1.0, params=Params()):
    return Instance(tuple(make_link(i, 0, 0, length, 0) for i in range(n)), params)


def random_instance(rng, n, area=10.0, lmin=1.0, lmax=2.0, params=Params(), weights=False):
    links = []
    for i in range(n):
        sx, sy = rng.uniform(0, area, 2)
        l = rng.uniform(lmin, lmax)
        th = rng.uniform(0, 2 * math.pi)
        w = float(rng.uniform(0.1, 1.0)) if weights else 1.0
        links.append(make_link(i, sx, sy, sx + l * math.cos(th), sy + l * math.sin(th), w))
    return Instance(tuple(links), params)


def random_gains(rng, n, spread=1.0):
    """Arbitrary positive gain table (not tied to geometry)."""
    s = np.exp(rng.normal(0, spread, n))
    m = np.exp(rng.normal(-1.5, spread, (n, n)))
    return GainTable(s, m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
