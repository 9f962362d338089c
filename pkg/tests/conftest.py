import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from toricvol.supports import SupportSpec, kostlan_support, linear_support
from toricvol.systems import SystemSpec

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def support(rows, variances=None):
    return SupportSpec.from_rows(rows, variances)


SQUARE = [[0, 0], [1, 0], [0, 1], [1, 1]]
TRIANGLE = [[0, 0], [1, 0], [0, 1]]
RECT_2x1 = [[0, 0], [1, 0], [2, 0], [0, 1], [1, 1], [2, 1]]


@pytest.fixture
def bilinear():
    return SystemSpec((support(SQUARE), support(SQUARE)))


@pytest.fixture
def mixed_rect_square():
    return SystemSpec((support(RECT_2x1), support(SQUARE)))


@pytest.fixture
def trinomial_037():
    return SystemSpec((support([[0], [3], [7]]),))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
