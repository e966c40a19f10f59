import numpy as np
import pytest

from asljde import PhysioParams, integrate_balloon


@pytest.fixture(scope="session")
def friston():
    return PhysioParams()


@pytest.fixture(scope="session")
def fine_trajectory(friston):
    """Impulse trajectory at a 1 ms step; reference for coarse-step checks."""
    return integrate_balloon(friston, None, 25.0, step=0.001,
                             initial_psi=friston.eta)
