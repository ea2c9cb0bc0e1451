import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, linalg

from oqsfield.bath import BathCorrelation, BathSpec, OhmicExponential
from oqsfield.core import pair_index, vectorize
from oqsfield.kernel import free_generator, qp_generator
from oqsfield.qubit import (SIGMA_MINUS, SIGMA_PLUS, QubitParams, qubit_analytic,
                            qubit_lindblad_generator, qubit_params, qubit_rates, qubit_system,
                            rates_superoperator)


def test_rates_hand_values():
    r = qubit_rates(QubitParams(1.0, 0.1, 0.5))
    expected = {"++,++": -0.15, "--,++": 0.15, "++,--": 0.05, "--,--": -0.05,
                "+-,+-": -0.1, "-+,-+": -0.1}
    assert r.keys() == expected.keys()
    for k, v in expected.items():
        assert r[k] == pytest.approx(v, rel=1e-15)


def test_params_derived_quantities():
    p = QubitParams(2.0, 0.1, 2.0, 0.3)
    assert p.gamma1 == pytest.approx(0.5)
    assert p.excited_population == pytest.approx(0.4)
    assert p.shifted_frequency == pytest.approx(1.7)


def test_params_validation():
    with pytest.raises(ValueError):
        QubitParams(0.0, 0.1, 0.0)
    with pytest.raises(ValueError):
        QubitParams(1.0, -0.1, 0.0)


def test_operators_and_system():
    assert np.array_equal(SIGMA_PLUS @ np.array([0, 1]), np.array([1, 0]))
    sys = qubit_system(1.4)
    assert np.allclose(sys.E, [0.7, -0.7])
    assert np.array_equal(sys.coupling(1), SIGMA_PLUS)
    assert np.array_equal(sys.coupling(2), SIGMA_MINUS)


def test_params_from_bath_and_shift():
    corr = BathCorrelation(BathSpec(OhmicExponential(0.05, 5.0), 2.0))
    p = qubit_params(1.0, corr)
    assert p.g0 == pytest.approx(0.05 * math.exp(-0.2))
    assert p.n0 == pytest.approx(1 / math.expm1(2.0))
    f = lambda w: 0.05 * w * math.exp(-w / 5) * (1 + 2 / math.expm1(2 * w)) if w > 0 else 0.025
    pv = integrate.quad(f, 0, 200, weight="cauchy", wvar=1.0, limit=500)[0]
    assert p.delta == pytest.approx(pv / (2 * math.pi), rel=1e-8)
    assert qubit_params(1.0, corr, with_shift=False).delta == 0.0


def test_rates_agree_with_kernel():
    corr = BathCorrelation(BathSpec(OhmicExponential(0.05, 5.0), 2.0))
    p = qubit_params(1.0, corr)
    L = qp_generator(qubit_system(1.0), corr).dissipator
    assert np.abs(rates_superoperator(qubit_rates(p)) - L).max() < 1e-15


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.0, 3.0), st.floats(-0.2, 0.2), st.floats(0.0, 30.0))
def test_analytic_solution_matches_generator_exponential(g0, n0, delta, t):
    p = QubitParams(1.0, g0, n0, delta)
    rho0 = np.array([[0.7, 0.2 - 0.3j], [0.2 + 0.3j, 0.3]])
    G = qubit_lindblad_generator(p)
    exact = (linalg.expm(G * t) @ vectorize(rho0)).reshape(2, 2)
    assert np.abs(qubit_analytic(p, rho0, t) - exact).max() < 1e-12


def test_lindblad_generator_decomposes():
    p = QubitParams(1.0, 0.1, 0.5, 0.02)
    G = qubit_lindblad_generator(p)
    pm = pair_index(0, 1, 2)
    free = free_generator(qubit_system(1.0))
    expected = free + rates_superoperator(qubit_rates(p))
    expected[pm, pm] += 1j * p.delta
    expected[pair_index(1, 0, 2), pair_index(1, 0, 2)] -= 1j * p.delta
    assert np.allclose(G, expected, atol=1e-15)


def test_analytic_shapes_and_limits():
    p = QubitParams(1.0, 0.1, 0.5)
    rho0 = np.diag([1.0, 0.0])
    assert qubit_analytic(p, rho0, 0.0).shape == (2, 2)
    traj = qubit_analytic(p, rho0, np.array([0.0, 1e4]))
    assert traj.shape == (2, 2, 2)
    assert traj[1, 0, 0].real == pytest.approx(p.excited_population, abs=1e-12)


def test_thermal_steady_state_n0_one():
    from oqsfield.core import check_density
    from oqsfield.dynamics import steady_state
    rho = steady_state(qubit_lindblad_generator(QubitParams(1.0, 0.1, 1.0)))
    assert np.allclose(rho, np.diag([1 / 3, 2 / 3]), atol=1e-12)
    assert check_density(rho).purity == pytest.approx(5 / 9, rel=1e-12)
