import numpy as np
import pytest

from heatgraph.diffusion import TimeGrid
from heatgraph.graph import eigendecompose
from heatgraph.mesh import cotan_laplacian, default_plate
from heatgraph.sampling import greedy_sensor_selection

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def plate_mesh():
    return default_plate()


@pytest.fixture(scope="session")
def plate_spectrum(plate_mesh):
    return eigendecompose(cotan_laplacian(plate_mesh))


@pytest.fixture(scope="session")
def plate_grid():
    return TimeGrid(0.16, 10, start_index=0)


@pytest.fixture(scope="session")
def plate_selection(plate_spectrum, plate_grid):
    return greedy_sensor_selection(plate_spectrum, plate_grid, 32)


@pytest.fixture(scope="session")
def hot_spots(plate_mesh):
    # two adjacent interior vertices on the plate's mid-line, left of the cavity
    V = plate_mesh.vertices
    a = int(np.flatnonzero(np.isclose(V[:, 0], 0.375) & np.isclose(V[:, 1], 0.5))[0])
    b = int(np.flatnonzero(np.isclose(V[:, 0], 0.5) & np.isclose(V[:, 1], 0.5))[0])
    x0 = np.zeros(plate_mesh.n_vertices)
    x0[a], x0[b] = 100.0, 75.0
    return x0


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
