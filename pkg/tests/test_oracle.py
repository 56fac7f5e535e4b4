"""Tests for the exact-diagonalization oracle."""

import math

import numpy as np
import pytest

from bosechain.errors import CapacityError, InvalidInputError, SiteIndexError
from bosechain.model import LatticeSpec, chain_spec, pth_couplings, uniform_couplings
from bosechain.oracle import (
    ExactPropagator,
    basis_size,
    closed_form_energy,
    condensate_mode,
    dense_correlator,
    dense_density,
    dense_hamiltonian,
    exact_evolve,
    exact_ground,
    fock_basis,
    pair_rdm_dense,
    pth_closed_form_ground,
    single_particle_propagate,
    transfer_fidelity,
)


def test_basis_size():
    assert basis_size(4, 4) == 35
    assert basis_size(12, 12) == 1_352_078


def test_basis_order_is_lexicographic_descending():
    basis = fock_basis(2, 2)
    assert basis.states.tolist() == [[2, 0], [1, 1], [0, 2]]
    assert basis.index[(1, 1)] == 1


def test_basis_capacity():
    with pytest.raises(CapacityError) as excinfo:
        fock_basis(12, 12)
    assert excinfo.value.exit_code == 4
    with pytest.raises(CapacityError):
        fock_basis(4, 4, cap=10)


def test_basis_capacity_from_environment(monkeypatch):
    monkeypatch.setenv("BOSECHAIN_ORACLE_CAP", "20")
    with pytest.raises(CapacityError):
        fock_basis(4, 4)


def test_single_boson_hamiltonian():
    spec = LatticeSpec(N=2, M=1, U=(0, 0), J=(1.0,))
    assert np.allclose(dense_hamiltonian(spec).toarray(), [[0.0, -1.0], [-1.0, 0.0]])


def test_hamiltonian_is_hermitian():
    H = dense_hamiltonian(chain_spec(4, 4, "ch", U_mid=3.0)).toarray()
    assert np.allclose(H, H.T)


@pytest.mark.parametrize("N, expected", [(4, -12.0), (6, -30.0)])
def test_pth_ground_energy(N, expected):
    energy, psi = exact_ground(chain_spec(N, N, "pth"))
    assert energy == pytest.approx(expected, abs=1e-9)
    assert np.linalg.norm(psi) == pytest.approx(1.0)


def test_closed_form_matches_ground_state():
    _, psi = exact_ground(chain_spec(4, 4, "pth"))
    closed = pth_closed_form_ground(4, 4)
    assert abs(np.vdot(closed, psi)) == pytest.approx(1.0, abs=1e-10)


def test_closed_form_gauges():
    assert closed_form_energy(4, 4, 2.0, "positive") == pytest.approx(-12.0)
    assert closed_form_energy(4, 4, 2.0, "printed") == pytest.approx(12.0)
    with pytest.raises(InvalidInputError):
        pth_closed_form_ground(4, 4, gauge="printed")


def test_condensate_mode_is_normalized():
    mode = condensate_mode(5)
    assert np.sum(mode**2) == pytest.approx(1.0)
    assert mode[0] == pytest.approx(0.25)


@pytest.mark.parametrize("N", [2, 3, 5, 8, 17, 32, 64])
def test_perfect_transfer(N):
    J = pth_couplings(N, 2.0)
    assert transfer_fidelity(J, 1, [math.pi / 2])[0] >= 1 - 1e-8
    assert abs(single_particle_propagate(J, 1, math.pi)[0]) ** 2 >= 1 - 1e-8


def test_uniform_chain_transfer_is_imperfect():
    fidelity = transfer_fidelity(uniform_couplings(5), 1, np.linspace(0, math.pi, 200))
    assert fidelity.max() < 1 - 1e-3


def test_single_particle_propagate_rejects_bad_start():
    with pytest.raises(SiteIndexError):
        single_particle_propagate(pth_couplings(4), 5, 1.0)


def test_exact_evolve_requires_normalized_input():
    spec = chain_spec(2, 2, "pth")
    with pytest.raises(InvalidInputError):
        exact_evolve(spec, np.array([1.0, 1.0, 0.0]), 1.0)


def test_exact_evolve_conserves_energy():
    spec = chain_spec(4, 4, "ch", U_mid=5.0)
    basis = fock_basis(4, 4)
    psi0 = np.zeros(basis.size, dtype=complex)
    psi0[basis.index[(1, 1, 1, 1)]] = 1.0
    propagator = ExactPropagator(spec, basis)
    psi = exact_evolve(spec, psi0, 0.7)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    assert propagator.energy(psi) == pytest.approx(propagator.energy(psi0), abs=1e-10)
    # singly occupied sites carry no repulsion
    assert propagator.energy(psi0) == pytest.approx(0.0, abs=1e-12)


def test_dense_observables_of_condensate():
    basis = fock_basis(4, 4)
    psi = pth_closed_form_ground(4, 4)
    assert dense_density(psi, basis, 1) == pytest.approx(0.5)
    assert dense_correlator(psi, basis, 1, 4) == pytest.approx(0.5)
    rho = pair_rdm_dense(psi, basis)
    assert rho.trace() == pytest.approx(1.0)
    assert rho.hermiticity_error() < 1e-14


@pytest.mark.parametrize("N", [2, 4, 6])
def test_closed_form_energy_matches_dense_hamiltonian(N):
    spec = chain_spec(N, N, "pth")
    psi = pth_closed_form_ground(N, N)
    # -lambda j N with j = (N - 1)/2
    energy = ExactPropagator(spec, fock_basis(N, N)).energy(psi)
    assert energy == pytest.approx(-N * (N - 1), abs=1e-9)
