import numpy as np
import pytest

from meshshape.mesh import make_disc_mesh, make_square5_mesh


@pytest.fixture(scope="session")
def square5():
    return make_square5_mesh()


@pytest.fixture(scope="session")
def disc2():
    return make_disc_mesh(2)


@pytest.fixture(scope="session")
def disc3():
    return make_disc_mesh(3)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_admissible_triangle(rng, min_area=1e-3):
    while True:
        p = rng.uniform(-2.0, 2.0, size=(3, 2))
        a, b = p[1] - p[0], p[2] - p[1]
        area = 0.5 * (a[0] * b[1] - a[1] * b[0])
        if area > min_area:
            return p


def central_difference(fn, coords, h=1e-6):
    flat = coords.ravel()
    out = np.zeros(flat.size)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        out[i] = (
            fn((flat + bump).reshape(coords.shape))
            - fn((flat - bump).reshape(coords.shape))
        ) / (2.0 * h)
    return out
