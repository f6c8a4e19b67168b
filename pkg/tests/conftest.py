import numpy as np
import pytest

from phaseshift.detect import NullModel
from phaseshift.phase import DemodConfig


@pytest.fixture(scope="session")
def demod_9hz():
    """Standard demodulator: 9 Hz center, 1 Hz half-bandwidth Butterworth."""
    return DemodConfig(9.0, 1.0)


@pytest.fixture(scope="session")
def null_model(demod_9hz):
    """Noisy 9 Hz oscillator at 250 Hz, equal-weight signal/noise mix."""
    return NullModel(f0_hz=9.0, rate_hz=250.0, noise_weight=0.5, demod=demod_9hz)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
