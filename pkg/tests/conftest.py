import numpy as np
import pytest

from ququart.optics import Waveplate
from ququart.protocol import instrument_matrix, standard_protocol

OPTIMAL_MM = (0.988, 0.836)
NON_OPTIMAL_MM = (0.836, 0.536)


@pytest.fixture(scope="session")
def optimal_spec():
    return standard_protocol(Waveplate(OPTIMAL_MM[0]), Waveplate(OPTIMAL_MM[1]))


@pytest.fixture(scope="session")
def non_optimal_spec():
    return standard_protocol(Waveplate(NON_OPTIMAL_MM[0]), Waveplate(NON_OPTIMAL_MM[1]))


@pytest.fixture(scope="session")
def optimal_x(optimal_spec):
    return instrument_matrix(optimal_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
