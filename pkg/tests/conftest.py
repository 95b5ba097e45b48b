import numpy as np
import pytest

from mmwlin.channel import build_channel, draw_aoas


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def channel64(rng):
    return build_channel(draw_aoas(rng, 8, 64), 64)
