import numpy as np
import pytest

from floatheave.grids import build_line_grid, build_surface_grid


@pytest.fixture(scope="session")
def line():
    return build_line_grid(100.0, 2**14)


@pytest.fixture(scope="session")
def small_grid():
    return build_surface_grid(20.0, 128)


@pytest.fixture(scope="session")
def mid_grid():
    return build_surface_grid(30.0, 512)


@pytest.fixture(scope="session")
def small_op(small_grid):
    from floatheave.omega import assemble_dtn

    return assemble_dtn(small_grid)


def flat_bump(x, center=1.0, width=1.0, skew=0.0):
    """Smooth decaying surface profile with zero slope at the cylinder."""
    return np.exp(-(((np.abs(x) - center) / width) ** 2)) * (1 + skew * np.sign(x))
