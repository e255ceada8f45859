import numpy as np
import pytest

from sml import manifolds


@pytest.fixture(scope="session")
def circle():
    return manifolds.Circle()


@pytest.fixture(scope="session")
def torus2():
    return manifolds.TorusD(2)


@pytest.fixture(scope="session")
def torus3():
    return manifolds.TorusD(3)


@pytest.fixture(scope="session")
def two_circles():
    return manifolds.TwoCircles()


@pytest.fixture(scope="session")
def circle_cloud(circle):
    return circle.sample_uniform(400, 1234)


@pytest.fixture(scope="session")
def two_circles_cloud(two_circles):
    return two_circles.sample_uniform(400, 4321)


def make_cloud_from_intrinsic(model, intrinsic, labels=None):
    """Point cloud at chosen intrinsic coordinates (for grid/duplicate tests)."""
    intrinsic = np.atleast_2d(np.asarray(intrinsic, dtype=float))
    if intrinsic.shape[0] == 1 and intrinsic.shape[1] > 1 and model.d == 1:
        intrinsic = intrinsic.T
    n = intrinsic.shape[0]
    if labels is None:
        labels = np.zeros(n, dtype=np.int64)
    else:
        labels = np.asarray(labels, dtype=np.int64)
    ambient = model.embed(intrinsic, labels)
    return manifolds.PointCloud(model, n, ambient, intrinsic, labels, seed=-1)
