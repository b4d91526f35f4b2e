import numpy as np
import pytest

from app.services.measures import new_measure


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def symmetric_pair():
    """mu = 1/2 d(-1) + 1/2 d(1) and nu = 1/2 d(-2) + 1/2 d(2)."""
    return new_measure([-1, 1], [0.5, 0.5]), new_measure([-2, 2], [0.5, 0.5])


@pytest.fixture
def grid_measure():
    """Random measures on the integer grid with rational weights (denominators <= 64)."""
    def draw(rng, max_atoms=8, dim=1, radius=4):
        atoms = int(rng.integers(1, max_atoms + 1))
        pts = rng.integers(-radius, radius + 1, size=(atoms, dim))
        w = rng.integers(1, 9, size=atoms).astype(float)
        return new_measure(pts, w / w.sum())
    return draw


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", default=False,
                     help="rewrite the files under golden/ from the current output")


@pytest.fixture
def update_golden(request):
    return request.config.getoption("--update-golden")
