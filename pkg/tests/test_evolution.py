import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from chpeakon._kernels import GAUSS_W, GAUSS_X, isotonic, limit_increments, merge_collapsed, rhs_arrays
from chpeakon.conserved import tilde_E
from chpeakon.evolution import (
    checkpoint_diagnostics,
    convolve_P,
    convolve_P_direct,
    evolve,
    rhs,
    step_rk4,
)
from chpeakon.exceptions import CorruptedStateError, InvalidParameterError
from chpeakon.lagrangian import LagrangianState
from chpeakon.scenarios import initial_state, make_peakon, make_peakon_antipeakon
from chpeakon.suites import random_state


def _pressure_oracle(x):
    # P = (1/4) int e^{-|x-s|} (u^2 + u_x^2 + u^2) ds for u = e^{-|s|}
    f = lambda s: 0.25 * math.exp(-abs(x - s)) * 3.0 * math.exp(-2.0 * abs(s))  # noqa: E731
    return integrate.quad(f, -60, 60, points=[0.0, x], limit=200)[0]


P_AT_0 = 0.5
P_AT_1 = 0.300211799553136  # e^{-1} - e^{-2}/2


def test_pressure_oracle_frozen():
    assert _pressure_oracle(0.0) == pytest.approx(P_AT_0, abs=1e-12)
    assert _pressure_oracle(1.0) == pytest.approx(P_AT_1, abs=1e-12)


def zero_state(n=33):
    a = np.linspace(-4, 4, n)
    return LagrangianState(a, a.copy(), np.zeros(n), np.zeros(n))


def test_zero_state_pressure():
    P, Px = convolve_P(zero_state())
    assert np.all(P == 0) and np.all(Px == 0)


def test_peakon_pressure_values(peakon_state):
    P, Px = convolve_P(peakon_state)
    i = int(np.argmin(np.abs(peakon_state.y)))
    assert abs(peakon_state.y[i]) < 1e-15
    assert P[i] == pytest.approx(P_AT_0, abs=2 * peakon_state.dalpha)
    assert Px[i] == pytest.approx(0.0, abs=2 * peakon_state.dalpha)
    j = int(np.argmin(np.abs(peakon_state.y - 1.0)))
    # evaluate the closed form at the nearest particle
    y = peakon_state.y[j]
    assert P[j] == pytest.approx(math.exp(-abs(y)) - 0.5 * math.exp(-2 * abs(y)), abs=2 * peakon_state.dalpha)


def test_rhs_at_crest(peakon_state):
    ev = rhs(peakon_state)
    i = int(np.argmax(peakon_state.U))
    assert np.array_equal(ev.dy, peakon_state.U)
    assert ev.dH[i] == pytest.approx(0.0, abs=2 * peakon_state.dalpha)
    assert ev.dU[i] == pytest.approx(0.0, abs=2 * peakon_state.dalpha)
    assert np.all(ev.P >= 0)


def test_zero_state_rhs_and_step():
    s = zero_state()
    ev = rhs(s)
    assert not ev.dy.any() and not ev.dH.any() and not ev.dU.any()
    s2 = step_rk4(s, 0.1)
    assert s2.t == pytest.approx(0.1)
    assert np.array_equal(s2.y, s.y) and np.array_equal(s2.H, s.H)


@given(seed=st.integers(0, 2**31 - 1), n=st.integers(4, 200))
def test_kernel_matches_direct_sum(seed, n):
    s = random_state(np.random.default_rng(seed), n)
    P, Px = convolve_P(s)
    Pd, Pxd = convolve_P_direct(s)
    scale = max(np.max(np.abs(Pd)), np.max(np.abs(Pxd)))
    assert np.max(np.abs(P - Pd)) <= 1e-12 * scale
    assert np.max(np.abs(Px - Pxd)) <= 1e-12 * scale


def test_kernel_overflow_safe():
    n = 64
    a = np.linspace(-1e6, 1e6, n)
    s = LagrangianState(a, a.copy(), np.ones(n), np.linspace(0, 1, n))
    P, Px = convolve_P(s)
    assert np.all(np.isfinite(P)) and np.all(np.isfinite(Px))


@given(seed=st.integers(0, 2**31 - 1), n=st.integers(4, 120))
def test_rhs_mirror_equivariant_bitwise(seed, n):
    s = random_state(np.random.default_rng(seed), n)
    y, U, m = s.y, s.U, np.diff(s.H)
    P, Px, F = rhs_arrays(y, U, m, GAUSS_X, GAUSS_W)
    Pm, Pxm, Fm = rhs_arrays(-y[::-1], -U[::-1], m[::-1].copy(), GAUSS_X, GAUSS_W)
    assert np.array_equal(P, Pm[::-1])
    assert np.array_equal(Px, -Pxm[::-1])
    assert np.array_equal(F, -Fm[::-1])


def test_odd_state_even_pressure(pair_state):
    P, Px = convolve_P(pair_state)
    assert np.max(np.abs(P - P[::-1])) < 1e-14
    assert np.max(np.abs(Px + Px[::-1])) < 1e-14


def test_decreasing_y_rejected():
    a = np.linspace(0, 1, 5)
    s = LagrangianState(a, a, np.zeros(5), np.zeros(5))
    bad = LagrangianState.__new__(LagrangianState)
    object.__setattr__(bad, "alpha", a)
    object.__setattr__(bad, "y", np.array([0, 0.5, 0.2, 0.8, 1.0]))
    object.__setattr__(bad, "U", s.U)
    object.__setattr__(bad, "H", s.H)
    object.__setattr__(bad, "t", 0.0)
    with pytest.raises(CorruptedStateError):
        convolve_P(bad)


def test_crest_advances(peakon_state):
    s = step_rk4(peakon_state, 1e-3)
    i = int(np.argmax(peakon_state.U))
    assert s.y[i] - peakon_state.y[i] == pytest.approx(1e-3, abs=1e-3 * 2 * peakon_state.dalpha)


def test_forward_backward(peakon_state):
    dt = 1e-3
    back = step_rk4(step_rk4(peakon_state, dt), -dt)
    assert np.max(np.abs(back.y - peakon_state.y)) < 1e-12
    assert np.max(np.abs(back.U - peakon_state.U)) < 1e-12
    assert back.t == pytest.approx(0.0, abs=1e-15)


def test_rk4_time_order():
    s0 = initial_state(make_peakon(1.0, n_nodes=2**14 + 1), 200, 5.0)
    ys = {dt: evolve(s0, 0.4, dt, checkpoint_every=10**6).final.U for dt in (0.04, 0.02, 0.01)}
    e1 = np.max(np.abs(ys[0.04] - ys[0.02]))
    e2 = np.max(np.abs(ys[0.02] - ys[0.01]))
    assert e1 / e2 >= 8.0


def test_evolve_zero_span(peakon_state):
    tr = evolve(peakon_state, 0.0, 1e-3)
    assert len(tr) == 1


def test_evolve_backward(peakon_state):
    tr = evolve(peakon_state, -0.01, 1e-3, checkpoint_every=5)
    assert tr.final.t == pytest.approx(-0.01)
    assert tr.times.tolist() == pytest.approx([0.0, -0.005, -0.01])


def test_evolve_rejects_bad_dt(peakon_state):
    with pytest.raises(InvalidParameterError):
        evolve(peakon_state, 0.01, 3e-3)
    with pytest.raises(InvalidParameterError):
        evolve(peakon_state, 0.01, -1e-3)


def test_energy_conserved_per_step(peakon_state):
    s = peakon_state
    for _ in range(5):
        s2 = step_rk4(s, 1e-3)
        assert abs(tilde_E(s2) - tilde_E(s)) <= 1e-3 * 1e-12 + 1e-12
        s = s2


def test_diagnostics_keys(peakon_state):
    d = checkpoint_diagnostics(peakon_state)
    assert set(d) == {"t", "E_tilde", "F_tilde", "E_ac", "mu_s", "xi", "M"}
    assert d["xi"] == pytest.approx(0.0, abs=1e-12) and d["M"] == pytest.approx(1.0)
    assert checkpoint_diagnostics(peakon_state, crest_sign=-1.0)["M"] < 1e-3


def test_coarse_collision_concentrates_energy():
    data = make_peakon_antipeakon(1.0, 5.0, n_nodes=2**16 + 1)
    s0 = initial_state(data, 400, 15.0)
    tr = evolve(s0, 8.0, 2e-3, checkpoint_every=5, keep_states=False)
    E = tr.series("E_tilde")
    mu = tr.series("mu_s")
    assert np.max(np.abs(E - E[0])) / E[0] < 1e-6
    assert np.max(mu) >= 0.95 * E[0]
    assert tr.series("E_ac")[-1] >= 0.95 * E[0]


@given(v=st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_isotonic_properties(v):
    y = np.array(v)
    p = isotonic(y)
    assert np.all(np.diff(p) >= -1e-12)
    assert math.isclose(p.sum(), y.sum(), abs_tol=1e-9)
    assert np.array_equal(isotonic(-y[::-1]), -p[::-1])
    if np.all(np.diff(y) >= 0):
        assert np.allclose(p, y)


@given(v=st.lists(st.integers(0, 3), min_size=2, max_size=20), u=st.lists(st.floats(-2, 2), min_size=20, max_size=20))
def test_merge_collapsed_equal_positions(v, u):
    y = np.cumsum(np.array(v, dtype=float))
    U = np.array(u[: y.size])
    W = merge_collapsed(y, U)
    for k in range(y.size - 1):
        if y[k] == y[k + 1]:
            assert W[k] == W[k + 1]
    assert math.isclose(W.sum(), U.sum(), abs_tol=1e-9)


@given(m=st.lists(st.floats(-0.1, 1.0, allow_subnormal=False), min_size=1, max_size=30))
def test_limit_increments_conserves(m):
    a = np.array(m)
    total = a.sum()
    b = a.copy()
    limit_increments(b, 50)
    assert math.isclose(b.sum(), total, abs_tol=1e-12)
    if total >= 0 and np.all(b >= 0):
        assert np.all(b >= 0)
