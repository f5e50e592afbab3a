import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chpeakon.exceptions import CorruptedStateError, DomainCoverageError, InvalidInputError
from chpeakon.lagrangian import (
    LagrangianState,
    alpha_transform,
    make_alpha_grid,
    particle_grid,
    reconstruct,
    singular_mass_estimate,
    spline_energy,
    thin_runs,
)
from chpeakon.measures import DataPair, EnergyMeasure, GridFunction, PeakonSum, h1_distance_sq, singular_mass
from chpeakon.scenarios import initial_state, make_peakon, make_zero


def zero_with_atom(mass=1.0, pos=0.0):
    x = np.linspace(-5, 5, 101)
    u = GridFunction(x, np.zeros_like(x), np.zeros_like(x))
    return DataPair(u, EnergyMeasure.from_density(x, np.zeros_like(x), [(pos, mass)]))


def test_zero_data_identity_transform():
    st_ = alpha_transform(make_zero(), np.linspace(-6, 6, 49))
    assert np.allclose(st_.y, st_.alpha, atol=1e-14)
    assert np.all(st_.U == 0) and np.all(st_.H == 0)


def test_atom_plateau():
    data = zero_with_atom()
    a = np.arange(-12, 15) * 0.5
    st_ = alpha_transform(data, a)
    at = dict(zip(a.tolist(), zip(st_.y.tolist(), st_.H.tolist())))
    assert at[-1.0][0] == pytest.approx(-1.0, abs=1e-14)
    assert at[0.5] == (0.0, pytest.approx(0.5, abs=1e-14))
    assert at[2.0][0] == pytest.approx(1.0, abs=1e-14)


def test_peakon_transform_values():
    data = make_peakon(1.0, n_nodes=2**16 + 1)
    a = np.arange(-40, 61) * 0.5
    st_ = alpha_transform(data, a)
    assert st_.y[a == 1.0][0] == pytest.approx(0.0, abs=1e-6)
    assert st_.y[-1] == pytest.approx(30.0 - 2.0, abs=1e-6)


def test_transform_requires_coverage():
    data = make_peakon(1.0, n_nodes=2**12 + 1)
    with pytest.raises(DomainCoverageError):
        alpha_transform(data, np.linspace(-1, 1, 10))


@pytest.mark.parametrize("kind", ["peakon", "atom"])
def test_transform_invariants(kind):
    if kind == "peakon":
        data = make_peakon(1.3, n_nodes=2**14 + 1)
    else:
        data = zero_with_atom(0.7, 0.3)
    a = make_alpha_grid(data, 300, 2.0)
    st_ = alpha_transform(data, a)
    # beta(alpha, 0) = alpha
    assert np.max(np.abs(st_.beta - st_.alpha)) <= 1e-12 * (1 + np.max(np.abs(a)))
    # y non-decreasing and 1-Lipschitz, H non-decreasing
    dy = np.diff(st_.y)
    assert np.all(dy >= 0) and np.all(dy <= st_.dalpha * (1 + 1e-12))
    assert np.all(np.diff(st_.H) >= 0)


def test_alpha_grid_anchor_is_node():
    data = make_peakon(1.0, x0=0.37, n_nodes=2**14 + 1)
    a = make_alpha_grid(data, 200, 3.0, [0.37])
    st_ = alpha_transform(data, a)
    assert np.min(np.abs(st_.y - 0.37)) < 1e-12


def test_state_validation():
    a = np.linspace(0, 1, 5)
    with pytest.raises(CorruptedStateError):
        LagrangianState(a, a[::-1].copy(), np.zeros(5), np.zeros(5))
    with pytest.raises(CorruptedStateError):
        LagrangianState(a, a, np.zeros(5), -a)
    with pytest.raises(InvalidInputError):
        LagrangianState(np.array([0, 1, 3.0]), np.zeros(3), np.zeros(3), np.zeros(3))


def test_identity_residual_third_order():
    res = []
    for n in (200, 400):
        st_ = initial_state(make_peakon(1.0, n_nodes=2**16 + 1), n, 5.0)
        res.append(np.max(np.abs(st_.identity_residual())))
    assert res[0] / res[1] > 6.0


def test_reconstruct_zero_state():
    a = np.linspace(-3, 3, 31)
    st_ = LagrangianState(a, a, np.zeros(31), np.zeros(31))
    d = reconstruct(st_, np.linspace(-2, 2, 9))
    assert np.all(d.u.values == 0) and d.mu.total_mass == 0


def test_reconstruct_plateau_atom():
    a = np.linspace(0, 10, 11)
    y = np.where(a < 4, a, np.where(a < 6, 4.0, a - 2))
    H = np.where(a < 4, 0.0, np.where(a < 6, 0.35 * (a - 4), 0.7))
    st_ = LagrangianState(a, y, np.zeros(11), H)
    d = reconstruct(st_)
    assert d.mu.atoms.tolist() == [[4.0, pytest.approx(0.7)]]
    assert singular_mass_estimate(st_) == pytest.approx(0.7)
    assert thin_runs(st_, 1e-3) == [(4, 6)]


def test_fully_collapsed_state():
    a = np.linspace(0, 1, 11)
    st_ = LagrangianState(a, np.zeros(11), np.zeros(11), a.copy())
    assert singular_mass_estimate(st_) == pytest.approx(1.0)


def test_roundtrip_peakon_refines(peakon_state):
    errs = []
    for n in (200, 400):
        st_ = initial_state(make_peakon(1.0, n_nodes=2**16 + 1), n, 5.0)
        d = reconstruct(st_, particle_grid(st_, 4))
        assert singular_mass(d.mu) == 0.0
        errs.append(math.sqrt(h1_distance_sq(d.u, PeakonSum([1.0], [0.0]))))
    assert errs[1] < errs[0]
    assert errs[0] < 0.02


def test_spline_energy_peakon(peakon_state):
    assert spline_energy(peakon_state) == pytest.approx(2.0, abs=1e-6)
    assert singular_mass_estimate(peakon_state) == 0.0


def test_reconstruct_density_compatible(peakon_state):
    d = reconstruct(peakon_state, particle_grid(peakon_state, 2))
    assert d.compat_defect() == 0.0


def test_reconstruct_total_mass(pair_state):
    # the density is sampled from the spline, so the mass matches H_N - H_1 to quadrature accuracy
    tot = pair_state.H[-1] - pair_state.H[0]
    errs = [abs(reconstruct(pair_state, particle_grid(pair_state, r)).mu.total_mass - tot) for r in (4, 8)]
    assert errs[0] < 1e-3 * tot
    assert 3.0 < errs[0] / errs[1] < 5.0


@given(mass=st.floats(0.2, 2.0), pos=st.floats(-3.0, 3.0))
def test_atom_roundtrip(mass, pos):
    data = zero_with_atom(mass, pos)
    a = make_alpha_grid(data, 200, 1.0)
    st_ = alpha_transform(data, a)
    atoms = reconstruct(st_, None).mu.atoms
    assert atoms.shape == (1, 2)
    assert abs(atoms[0, 0] - pos) <= st_.dalpha
    assert abs(atoms[0, 1] - mass) <= 2 * st_.dalpha


def test_particle_grid_refine(peakon_state):
    x = particle_grid(peakon_state, 3)
    assert x.size == 3 * (np.unique(peakon_state.y).size - 1) + 1
