import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chpeakon.exceptions import InvalidInputError, InvalidParameterError
from chpeakon.measures import DataPair, GridFunction, PeakonSum
from chpeakon.stability import (
    HYPOTHESIS_NOT_MET,
    StabilityRecord,
    algebraic_check,
    crest,
    cubic_Q,
    initial_defect,
    lemma_bound,
    lemma_i_identity,
    lemma_ii_check,
    lemma_iii_iv_check,
    monitor_result,
    morrey_gap,
    peakon_distance,
)


def peakon_pair(c=1.0, x0=0.0, atoms=(), n=20_001):
    u = PeakonSum([c], [x0]).grid_function(x0 - 25, x0 + 25, n)
    return DataPair.from_profile(u, atoms)


def test_crest_leftmost_maximizer():
    x = np.arange(5.0)
    u = GridFunction(x, np.array([0.0, 2.0, 1.0, 2.0, 0.0]), np.zeros(5))
    assert crest(u) == (1.0, 2.0)
    assert crest(u, -1.0) == (0.0, 0.0)


def test_crest_empty():
    with pytest.raises(InvalidInputError):
        crest(GridFunction(np.array([]), np.array([]), np.array([])))


def test_peakon_distance_exact_peakon():
    pd = peakon_distance(peakon_pair(x0=1.5), 1.0)
    assert pd["xi"] == 1.5 and pd["M"] == pytest.approx(1.0)
    assert pd["total"] < 1e-8


def test_peakon_distance_scaled():
    # ||0.1 phi||^2 = 2 * 0.01
    pd = peakon_distance(peakon_pair(1.1), 1.0)
    assert pd["dist2"] == pytest.approx(0.02, abs=1e-5)
    assert pd["mu_s"] == 0.0


def test_peakon_distance_with_atom():
    pd = peakon_distance(peakon_pair(atoms=[(7.0, 0.3)]), 1.0)
    assert pd["mu_s"] == pytest.approx(0.3)
    assert pd["total"] == pytest.approx(0.3, abs=1e-8)


def test_peakon_distance_rejects_zero_speed():
    with pytest.raises(InvalidParameterError):
        peakon_distance(peakon_pair(), 0.0)


def test_lemma_i_identity_peakon_shifted_reference():
    # the two sides use independent quadratures, so the gap is second order in h
    gaps = []
    for n in (20_001, 40_001):
        data = peakon_pair(1.2, atoms=[(3.0, 0.1)], n=n)
        gaps.append([abs(np.subtract(*lemma_i_identity(data, 1.0, xi))) for xi in (0.0, 0.4, -1.3)])
    assert max(gaps[0]) < 1e-5
    assert max(gaps[1]) < 0.3 * max(gaps[0])


def test_lemma_ii_peakon_equality():
    # equality holds for a peakon: 4/3 c^3 = c * 2c^2 - 2/3 c^3
    F, bound = lemma_ii_check(peakon_pair(1.3))
    assert F == pytest.approx(bound, abs=1e-5)
    F, bound = lemma_ii_check(peakon_pair(1.0, atoms=[(2.0, 0.5)]))
    assert F <= bound + 1e-6


def test_lemma_iii_iv_peakon_and_hypothesis():
    out = lemma_iii_iv_check(peakon_pair(1.0), 1.0, 0.01)
    assert out["status"] == "pass"
    out = lemma_iii_iv_check(peakon_pair(1.5), 1.0, 0.01)
    assert out["status"] == HYPOTHESIS_NOT_MET
    with pytest.raises(InvalidParameterError):
        lemma_iii_iv_check(peakon_pair(), 1.0, 0.0)


def test_cubic_Q_values():
    q = cubic_Q(1.0, 2.0, 4.0 / 3.0, 1.0)
    assert q.Q == pytest.approx(0.0) and q.Q0 == 0.0
    q = cubic_Q(0.0, 2.0, 4.0 / 3.0, 1.0)
    assert q.Q == pytest.approx(2.0) and q.Q0 == 2.0


@given(y=st.floats(-5, 5), c=st.floats(0.1, 3))
def test_cubic_Q_on_peakon_invariants(y, c):
    q = cubic_Q(y, 2 * c * c, 4 / 3 * c**3, c)
    scale = 1 + abs(y) ** 3 + c**3
    assert q.Q == pytest.approx(q.Q0, abs=1e-12 * scale)
    assert q.Q0 == pytest.approx(q.Q0_expanded, abs=1e-12 * scale)


def test_algebraic_check_value():
    delta = 0.9**4 / (6**4 * 2**4)
    lhs, rhs = algebraic_check(1.0, 0.9)
    assert lhs == pytest.approx(4 * delta + 4 * math.sqrt(6 * delta), rel=1e-14)
    assert lhs == pytest.approx(0.055241, abs=1e-6)
    assert rhs == pytest.approx(0.81)


@given(c=st.floats(0.01, 100), eps=st.floats(1e-3, 0.999))
def test_algebraic_inequality_holds(c, eps):
    lhs, rhs = algebraic_check(c, eps)
    assert lhs <= rhs


def test_lemma_bound_monotone():
    assert lemma_bound(1.0, 0.0) == 0.0
    assert lemma_bound(1.0, 1e-4) < lemma_bound(1.0, 2e-4)


def test_monitor_result_flags():
    rec = StabilityRecord(0.0, 0.0, 1.0, 1e-12, 0.0, 1e-12, 0.1, 0.81)
    res = monitor_result([rec], 1.0, 0.9, 1e-12)
    assert res.hypothesis_met and res.bound_holds and res.algebraic_ok
    assert res.summary()["status"] == "pass"
    res = monitor_result([rec], 1.0, 0.9, 0.5)
    assert res.summary()["status"] == HYPOTHESIS_NOT_MET


def test_initial_defect():
    defect, delta0 = initial_defect(peakon_pair(atoms=[(1.0, 0.02)]), 1.0)
    assert defect == pytest.approx(0.02, abs=1e-8)
    assert delta0 == pytest.approx(0.2, abs=1e-7)


@given(k=st.floats(0.01, 100), seed=st.integers(0, 1000))
def test_crest_scaling_invariant(k, seed):
    r = np.random.default_rng(seed)
    x = np.linspace(0, 1, 50)
    u = GridFunction(x, r.normal(size=50), np.zeros(50))
    v = GridFunction(x, k * u.values, np.zeros(50))
    assert crest(u)[0] == crest(v)[0]


@given(amps=st.lists(st.floats(-2, 2), min_size=1, max_size=4), shift=st.floats(-3, 3))
def test_morrey_inequality(amps, shift):
    centers = shift + 1.7 * np.arange(len(amps))
    u = PeakonSum(amps, centers).grid_function(-30, 30, 6001)
    assert morrey_gap(u) <= 1e-6
