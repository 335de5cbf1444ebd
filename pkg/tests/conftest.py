import numpy as np
import pytest

from rydqec.code import build_circuit, build_layout
from rydqec.dynamics import IonizationSchedule, NoiseParams, compose_plaquette
from rydqec.pulse import default_pulse
from rydqec.twirl import extract_pauli_channel


@pytest.fixture(scope="session")
def profile():
    return default_pulse()


@pytest.fixture(scope="session")
def layout3():
    return build_layout(3)


@pytest.fixture(scope="session")
def circuit3(layout3):
    return build_circuit(layout3)


@pytest.fixture(scope="session")
def plaquette_none_1em3(profile):
    return compose_plaquette(profile, NoiseParams(gamma=1e-3),
                             IonizationSchedule("none"))


@pytest.fixture(scope="session")
def channel_none_1em3(profile):
    return extract_pauli_channel(profile, NoiseParams(gamma=1e-3),
                                 IonizationSchedule("none"))


@pytest.fixture(scope="session")
def channel_all_1em3(profile):
    return extract_pauli_channel(profile, NoiseParams(gamma=1e-3),
                                 IonizationSchedule("after_every_gate_both", 1.0))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(99)
