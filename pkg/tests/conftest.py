import numpy as np
import pytest
import torch

from tempcast.grids import GridSpec

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def small_grid() -> GridSpec:
    return GridSpec.cell_centered(8, 16)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
