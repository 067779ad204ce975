import numpy as np
import pytest

from flowfield import Camera, MotionParams, make_mini_model


@pytest.fixture(scope="session")
def mini2():
    return make_mini_model(seed=1, n_subdiv=2)


@pytest.fixture(scope="session")
def mini3():
    return make_mini_model(seed=1, n_subdiv=3)


def zero_params(assets) -> MotionParams:
    return MotionParams(
        beta=np.zeros(assets.num_shape),
        theta=np.zeros(assets.theta_size),
        psi=np.zeros(assets.num_expr),
    )


def head_camera(size: int = 64, distance: float = 1.0) -> Camera:
    """Camera on the -z axis looking at the origin, head nicely framed."""
    f = 200.0 * size / 64.0
    k = np.array([[f, 0.0, size / 2.0], [0.0, f, size / 2.0], [0.0, 0.0, 1.0]])
    h = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, -distance]])
    return Camera(K=k, H=h, width=size, height=size)


@pytest.fixture(scope="session")
def cam64():
    return head_camera(64)
