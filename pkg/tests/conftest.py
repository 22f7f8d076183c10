import numpy as np
import pytest


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def rand_sphere_points(rng, ambient_dim, count):
    v = rng.standard_normal((count, ambient_dim + 1))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
