import numpy as np
import pytest

from chirpsync.waveform import ChirpParams

FS = 1.6e6


@pytest.fixture
def prototype():
    """The T = 780 us chirp at 0.251 kHz/us."""
    return ChirpParams.from_display(0.251, 0.0, 780.0)


@pytest.fixture
def half_burst():
    """One half of the composite burst: 0.481 kHz/us over 390 us."""
    return ChirpParams.from_display(0.481, 0.0, 390.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
