import numpy as np
import pytest

from pinwalk import WalkParams

P_GRID = (0.1, 0.3, 0.45)


@pytest.fixture(params=P_GRID)
def walk(request):
    return WalkParams(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
