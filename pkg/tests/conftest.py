import numpy as np
import pytest

from pceval.assignment import approx_match_cost
from pceval.distances import chamfer, dcd


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests see steady-state costs."""
    rng = np.random.default_rng(0)
    a = rng.random((8, 3))
    b = rng.random((8, 3))
    chamfer(a, b)
    dcd(a, b, alpha=1.0)
    approx_match_cost(a, b, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

