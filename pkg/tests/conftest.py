import numpy as np
import pytest

from evoscope.family import ConstantDecay, MatrixODE, example1, example2
from evoscope.grid import TimeGrid


@pytest.fixture(scope="session")
def grid200():
    return TimeGrid.uniform(200.0, 0.01)


@pytest.fixture(scope="session")
def grid50():
    return TimeGrid.uniform(50.0, 0.01)


@pytest.fixture(scope="session")
def grid_ex2_log():
    return TimeGrid.uniform(1e4, 0.05, T_sup=1e8, sampling="log")


@pytest.fixture(scope="session")
def cd():
    return ConstantDecay(1.0)


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def ex2():
    return example2()


@pytest.fixture(scope="session")
def damped():
    return MatrixODE("damped_rotation", step=0.02, name="damped_rotation")


def rotation(d):
    c, s = np.cos(d), np.sin(d)
    return np.array([[c, s], [-s, c]])
