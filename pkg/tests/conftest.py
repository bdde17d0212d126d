import numpy as np
import pytest

from spinpulse.bath import preset_bath
from spinpulse.pulses import constant_rotation_pulse


@pytest.fixture(scope="session")
def dynamic_bath():
    return preset_bath("spin-dynamic", coupling=1.0, omega_b=1.0)


@pytest.fixture(scope="session")
def ising_bath():
    return preset_bath("spin-ising", coupling=1.0, omega_b=1.0)


@pytest.fixture(scope="session")
def pi_pulse():
    """Constant-amplitude pi pulse satisfying the total-rotation requirement."""
    return constant_rotation_pulse(1.0, np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
