import numpy as np
import pytest

from vectorforge.geometry import Scene, circle_shape


def make_scene(rng, n_shapes=3, size=32, wobble=1.5, alpha=(0.3, 1.0)):
    """Perturbed circles with random colors on a random background."""
    shapes = []
    for _ in range(n_shapes):
        color = (*rng.uniform(0, 1, 3), rng.uniform(*alpha))
        s = circle_shape(rng.uniform(0.25 * size, 0.75 * size, 2), rng.uniform(0.12, 0.3) * size, 4, color)
        s.points += rng.normal(0, wobble, s.points.shape)
        shapes.append(s)
    return Scene(shapes, size, size, rng.uniform(0, 1, 3))


def central_difference(f, array, index, step):
    old = array[index]
    array[index] = old + step
    up = f()
    array[index] = old - step
    down = f()
    array[index] = old
    return (up - down) / (2 * step)


def grad_close(analytic, numeric, rel=1e-2, abs_=1e-6):
    err = abs(analytic - numeric)
    return err <= abs_ or err <= rel * max(abs(analytic), abs(numeric))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
