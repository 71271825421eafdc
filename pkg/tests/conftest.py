import numpy as np
import pytest

from binomial_di.channel import ChannelParams
from binomial_di.packing import Codebook


@pytest.fixture
def params():
    return ChannelParams.with_amplitude(1.0, 0.3, 10.0)


@pytest.fixture
def small_codebook():
    cw = np.array([[0.2, 0.8, 0.5], [0.9, 0.1, 0.4], [0.5, 0.5, 0.95]])
    return Codebook(cw, r0=0.2, A=1.0, a=0.1, b=0.25, c_min=0.05)
