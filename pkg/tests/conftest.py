import math

import numpy as np
import pytest

from oqsfield.bath import VACUUM, BathCorrelation, BathSpec, OhmicExponential
from oqsfield.core import SystemSpec
from oqsfield.qubit import qubit_system

# acceptance outcomes collected for the terminal summary
ACCEPTANCE_LINES = {}


def random_system(rng, d, zero_diagonal=True):
    """Generic few-level system coupled through a random complex jump operator."""
    E = np.sort(rng.uniform(-1.0, 1.0, d))
    # keep Bohr frequencies apart so no accidental degeneracies appear
    while np.min(np.diff(E)) < 0.05 or len({round(x, 6) for x in (E[:, None] - E[None, :]).ravel()}) < d * d - d + 1:
        E = np.sort(rng.uniform(-1.0, 1.0, d))
    S = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    if zero_diagonal:
        np.fill_diagonal(S, 0.0)
    return SystemSpec.from_jump(E, 0.5 * S)


def random_ohmic(rng, vacuum=False):
    eta = rng.uniform(0.005, 0.05)
    cutoff = rng.uniform(2.0, 10.0)
    beta = VACUUM if vacuum else rng.uniform(0.5, 5.0)
    return BathSpec(OhmicExponential(eta, cutoff), beta)


def random_density(rng, d):
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def qubit():
    return qubit_system(1.0)


@pytest.fixture
def ohmic_thermal():
    return BathCorrelation(BathSpec(OhmicExponential(0.05, 5.0), 2.0))


@pytest.fixture
def ohmic_vacuum():
    return BathCorrelation(BathSpec(OhmicExponential(0.05, 5.0)))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
