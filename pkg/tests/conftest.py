from dataclasses import dataclass

import numpy as np
import pytest

from weakkam.barrier import aubry_nodes, peierls, weak_kam_row
from weakkam.criticality import critical_value, extreme_measures, tight_graph
from weakkam.lattice import Grid, build_kernel
from weakkam.model import AlphaProfile, ModelSpec, oracle

MECH = ModelSpec.mechanical([(2, 1.0, 0.0)])  # V = cos(4 pi x)
ROT = ModelSpec.rotation(1.0, 0.3)
BAND = AlphaProfile.vanishing_band(0.55, 0.70, level=1.0, ramp=0.05)
PSIN = AlphaProfile.positive_sinusoid(1.5, 1.0, 1.0)
ONE = AlphaProfile.constant(1.0)


@dataclass
class Setup:
    model: ModelSpec
    grid: Grid
    raw: object
    c_grid: float
    kernel: object
    barrier: object
    aubry: list
    weak_kam: object
    family: object
    oracle: object


def make_setup(model, N, K, dt):
    grid = Grid(N)
    raw = build_kernel(grid, model, K, dt, 0.0)
    c = critical_value(raw)
    kc = raw.with_constant(c)
    bt = peierls(kc)
    aub = aubry_nodes(bt)
    w = weak_kam_row(bt, aub[0])
    fam = extreme_measures(tight_graph(kc, w.u, 1e-8 * (1 + abs(c)) * dt), N)
    return Setup(model, grid, raw, c, kc, bt, aub, w, fam, oracle(model))


@pytest.fixture(scope="session")
def mech():
    return make_setup(MECH, 256, 4, 1 / 64)


@pytest.fixture(scope="session")
def rot():
    return make_setup(ROT, 256, 8, 1 / 64)


@pytest.fixture(scope="session")
def mech_small():
    return make_setup(MECH, 64, 2, 1 / 32)


@pytest.fixture(scope="session")
def rot_small():
    # dt = 4 / N keeps v = 1 on the step k = 4
    return make_setup(ROT, 64, 8, 1 / 16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
