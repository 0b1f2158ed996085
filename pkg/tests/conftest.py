import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from graphflex.graph import build_graph  # noqa: E402


@pytest.fixture
def two_triangles_bridge():
    """Two triangles {0,1,2} and {3,4,5} joined by the bridge (2,3)."""
    return build_graph(
        6, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (3, 5, 1.0), (4, 5, 1.0)]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(0)
