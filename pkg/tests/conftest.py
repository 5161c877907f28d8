import numpy as np
import pytest

import vemspectra as vs


def random_convex_polygon(rng, n_min=3, n_max=10, scale=1.0):
    """Convex polygon as the hull of random points (CCW, simple)."""
    from scipy.spatial import ConvexHull

    while True:
        cloud = rng.uniform(-1.0, 1.0, size=(n_max + 4, 2)) * scale
        cloud += rng.uniform(-2.0, 2.0, size=2)
        hull = ConvexHull(cloud)
        pts = cloud[hull.vertices]  # CCW for 2D hulls
        if len(pts) < n_min:
            continue
        edges = np.roll(pts, -1, axis=0) - pts
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        if lengths.min() > 0.05 * scale:
            return pts


@pytest.fixture
def unit_square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


@pytest.fixture
def quad_mesh_2x2():
    return vs.build_mesh("unit-square", "quad", 2)
