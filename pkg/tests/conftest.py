import numpy as np
import pytest

from boundlab import build_cube_mesh, make_power_nonlinearity, solve_ground_state


@pytest.fixture(scope="session")
def mesh2():
    return build_cube_mesh(2)


@pytest.fixture(scope="session")
def mesh4():
    return build_cube_mesh(4)


@pytest.fixture(scope="session")
def mesh8():
    return build_cube_mesh(8)


@pytest.fixture(scope="session")
def ground_state_p2_n8(mesh8):
    nl = make_power_nonlinearity(2.0)
    return nl, solve_ground_state(mesh8, nl, 1e-8, seed=11)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
