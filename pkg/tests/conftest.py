import numpy as np
import pytest

from glideplan.aero import Airframe, polar_from_airframe


@pytest.fixture(scope="session")
def airframe() -> Airframe:
    """The 1.5 kg benchmark airframe used across the suite."""
    return Airframe(m=1.5, S=0.4, AR=6.0, e=0.9, C_D0=0.03)


@pytest.fixture(scope="session")
def polar(airframe):
    p, _rms = polar_from_airframe(airframe)
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(20260825)
