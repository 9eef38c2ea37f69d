import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_box(rng, min_side=0.05, max_side=0.9):
    """Valid random box with side lengths in the requested range."""
    w = rng.uniform(min_side, max_side)
    h = rng.uniform(min_side, max_side)
    x0 = rng.uniform(0.0, 1.0 - w)
    y0 = rng.uniform(0.0, 1.0 - h)
    from weakloc.geometry import Box

    return Box(x0, y0, x0 + w, y0 + h)


def lattice_box(rng, grid=1000, min_cells=50):
    """Random box whose coordinates are multiples of 1/grid."""
    w = int(rng.integers(min_cells, grid))
    h = int(rng.integers(min_cells, grid))
    x0 = int(rng.integers(0, grid - w + 1))
    y0 = int(rng.integers(0, grid - h + 1))
    from weakloc.geometry import Box

    return Box(x0 / grid, y0 / grid, (x0 + w) / grid, (y0 + h) / grid)
