import json
from pathlib import Path

import numpy as np
import pytest

from maternmle import MaternParams, SpatialDataset, simulate_grf

DATA_DIR = Path(__file__).parent / "data"


def grid_locations(side: int, extent: float = 1.0) -> np.ndarray:
    axis = np.linspace(0.0, extent, side)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def simulated_dataset(side: int, theta: MaternParams, seed: int) -> SpatialDataset:
    locations = grid_locations(side)
    values = simulate_grf(locations, theta, seed)
    return SpatialDataset(locations, values)


@pytest.fixture(scope="session")
def bessel_oracle():
    with open(DATA_DIR / "bessel_oracle.json", "r", encoding="utf-8") as handle:
        return json.load(handle)


@pytest.fixture
def theta_default():
    return MaternParams(1.0, 0.1, 0.5)


@pytest.fixture
def small_dataset(theta_default):
    return simulated_dataset(5, theta_default, seed=20240901)
