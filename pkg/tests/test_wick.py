import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oqsfield.bath import VACUUM
from oqsfield.wick import (FockOracle, OperatorString, TruncationError, WickLimitError,
                           double_factorial, perfect_matchings, random_string, strings_of,
                           thermal_expectation_bruteforce, verify_wick, wick_contraction_sum)


@pytest.mark.parametrize("n,count", [(0, 1), (2, 1), (4, 3), (6, 15), (8, 105), (10, 945)])
def test_matching_counts(n, count):
    assert double_factorial(n - 1) == count
    assert sum(1 for _ in perfect_matchings(n)) == count


def test_matchings_are_distinct_and_complete():
    ms = [tuple(m) for m in perfect_matchings(6)]
    assert len(set(ms)) == len(ms)
    for m in ms:
        assert sorted(i for p in m for i in p) == list(range(6))
        assert all(i < j for i, j in m)


def test_odd_length_has_no_matchings():
    assert list(perfect_matchings(5)) == []


def test_operator_string_validation():
    with pytest.raises(ValueError):
        OperatorString(((3, 0.0),))
    with pytest.raises(ValueError):
        OperatorString(((1, math.inf),))


def test_single_mode_vacuum_two_point():
    oracle = FockOracle(((0.4, 1.3),), n_max=10)
    corr = oracle.correlation()
    s = strings_of([1, 2], [0.7, 0.2])
    expected = 0.16 * np.exp(-1.3j * 0.5)
    assert thermal_expectation_bruteforce(oracle, s) == pytest.approx(expected, rel=1e-14)
    assert wick_contraction_sum(s, corr) == pytest.approx(expected, rel=1e-14)


def test_number_moment_thermal():
    # <b^dag b^dag b b> = 2 n^2 for a thermal mode
    beta, om = 1.0, 1.0
    oracle = FockOracle(((1.0, om),), n_max=40, beta=beta)
    n = 1 / math.expm1(beta * om)
    s = strings_of([2, 2, 1, 1], [0, 0, 0, 0])
    assert thermal_expectation_bruteforce(oracle, s) == pytest.approx(2 * n * n, rel=1e-8)
    assert wick_contraction_sum(s, oracle.correlation()) == pytest.approx(2 * n * n, rel=1e-12)


def test_unbalanced_string_vanishes():
    oracle = FockOracle(((0.5, 1.0),), n_max=20, beta=1.0)
    s = strings_of([1, 1, 1, 2], [0.1, 0.2, 0.3, 0.4])
    assert abs(thermal_expectation_bruteforce(oracle, s)) < 1e-15
    assert wick_contraction_sum(s, oracle.correlation()) == 0


def test_odd_string_vanishes():
    oracle = FockOracle(((0.5, 1.0),), n_max=8)
    assert wick_contraction_sum(strings_of([1, 2, 1], [0, 0, 0]), oracle.correlation()) == 0


def test_length_limit():
    oracle = FockOracle(((0.5, 1.0),), n_max=4)
    s = strings_of([1, 2] * 7, [0.0] * 14)
    with pytest.raises(WickLimitError):
        wick_contraction_sum(s, oracle.correlation())
    with pytest.raises(WickLimitError):
        verify_wick(oracle, oracle.correlation(), max_n=10)


def test_fock_dimension_limit():
    with pytest.raises(WickLimitError):
        FockOracle(((0.1, 1.0), (0.1, 2.0), (0.1, 3.0)), n_max=40)


def test_truncation_guard():
    oracle = FockOracle(((0.5, 0.2),), n_max=5, beta=1.0)
    assert oracle.truncation_error() > 1e-8
    with pytest.raises(TruncationError):
        thermal_expectation_bruteforce(oracle, strings_of([1, 2], [0, 0]))


def test_vacuum_truncation_is_exact():
    assert FockOracle(((0.5, 1.0),), n_max=3, beta=VACUUM).truncation_error() == 0.0


def test_random_string_balanced():
    rng = np.random.default_rng(1)
    s = random_string(rng, 6)
    assert sorted(s.channels) == [1, 1, 1, 2, 2, 2]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 4, 6]), st.sampled_from([1.0, VACUUM]))
def test_wick_matches_bruteforce_two_modes(seed, n, beta):
    oracle = FockOracle(((0.3, 1.0), (0.2, 1.7)), n_max=30, beta=beta)
    s = random_string(np.random.default_rng(seed), n)
    bf = thermal_expectation_bruteforce(oracle, s)
    wk = wick_contraction_sum(s, oracle.correlation())
    assert abs(bf - wk) <= 1e-9 * (abs(bf) + 1e-12)


def test_verify_wick_report():
    oracle = FockOracle(((0.3, 1.0),), n_max=40, beta=1.0)
    rep = verify_wick(oracle, oracle.correlation(), max_n=6, strings_per_length=3)
    assert set(rep.by_length) == {2, 4, 6}
    assert rep.n_strings == 9
    assert rep.max_deviation < 1e-8
