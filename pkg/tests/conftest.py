import os

import numpy as np
import pytest

from fkdvlab.spectral import Grid
from fkdvlab.groundstate import solve_ground_state


@pytest.fixture(scope="session", autouse=True)
def _cache_dir(tmp_path_factory):
    # exercise the ground-state cache and share solves across test modules
    path = tmp_path_factory.mktemp("fkdv_cache")
    os.environ["FKDV_CACHE_DIR"] = str(path)
    yield
    os.environ.pop("FKDV_CACHE_DIR", None)


@pytest.fixture(scope="session")
def grid_std():
    return Grid(2**13, 400.0)


@pytest.fixture(scope="session")
def grid_tail():
    # dedicated large box for tail work (algebraic decay)
    return Grid(2**14, 800.0)


@pytest.fixture(scope="session")
def gs_kdv(grid_std):
    return solve_ground_state(2.0, 1.0, grid_std)


@pytest.fixture(scope="session")
def gs_bo(grid_tail):
    return solve_ground_state(1.0, 1.0, grid_tail)


@pytest.fixture(scope="session")
def gs_mid(grid_std):
    return solve_ground_state(1.5, 1.0, grid_std)


def rng(seed=0):
    return np.random.default_rng(seed)
