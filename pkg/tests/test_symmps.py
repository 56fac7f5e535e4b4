"""Tests for charge-tagged matrix product states."""

import math

import numpy as np
import pytest

from bosechain.errors import CorruptionError, InvalidInputError, ShapeMismatchError, SiteIndexError
from bosechain.oracle import fock_basis
from bosechain.symmps import (
    ANNIHILATE,
    CREATE,
    NUMBER,
    BondSpectrum,
    TruncationPolicy,
    canonical_error,
    canonicalize,
    expectation,
    fidelity,
    norm,
    overlap,
    product_state,
    schmidt_entropy,
    spectrum_entropy,
    to_dense,
    truncate_bond,
    truncation_order,
)
from bosechain.tebd import EvolutionParams, evolve


def test_product_state_structure():
    state = product_state([2, 0, 1])
    state.check()
    assert state.N == 3
    assert state.M == 3
    assert state.bond_dimensions == [1, 1]
    assert [int(bond.charges[0]) for bond in state.bonds] == [2, 2]
    assert norm(state) == pytest.approx(1.0)


def test_product_state_rejects_negative_occupation():
    with pytest.raises(InvalidInputError):
        product_state([1, -1])


def test_number_expectation_on_product_state():
    state = product_state([2, 0, 1])
    assert [expectation(state, {k: NUMBER}).real for k in (1, 2, 3)] == pytest.approx([2, 0, 1])


def test_hopping_expectation_vanishes_on_product_state():
    state = product_state([1, 1, 1])
    assert abs(expectation(state, {1: CREATE, 2: ANNIHILATE})) < 1e-15


def test_expectation_rejects_bad_site():
    with pytest.raises(SiteIndexError):
        expectation(product_state([1, 1]), {3: NUMBER})


def test_to_dense_places_product_state():
    state = product_state([2, 0, 1])
    basis = fock_basis(3, 3)
    vector = to_dense(state)
    assert vector[basis.index[(2, 0, 1)]] == pytest.approx(1.0)
    assert np.sum(np.abs(vector) ** 2) == pytest.approx(1.0)


def test_overlap_of_distinct_fock_states_is_zero():
    assert overlap(product_state([1, 1]), product_state([2, 0])) == 0


def test_overlap_rejects_mismatched_states():
    with pytest.raises(ShapeMismatchError):
        overlap(product_state([1, 1]), product_state([1, 1, 1]))


def test_truncation_policy_validation():
    with pytest.raises(InvalidInputError):
        TruncationPolicy(rel_threshold=0.0)
    with pytest.raises(InvalidInputError):
        TruncationPolicy(chi_max=0)


def test_truncation_order_breaks_ties_by_lower_charge():
    weights = np.array([0.5, 0.5, 0.1])
    charges = np.array([2, 1, 0])
    keep = truncation_order(weights, charges, TruncationPolicy(chi_max=1))
    assert list(keep) == [1]


def test_truncation_order_relative_threshold():
    weights = np.array([1.0, 0.4, 0.6])
    charges = np.array([0, 1, 2])
    keep = truncation_order(weights, charges, TruncationPolicy(rel_threshold=0.5))
    assert list(keep) == [0, 2]


def test_spectrum_entropy_of_equal_weights():
    assert spectrum_entropy(np.full(4, 0.5)) == pytest.approx(2.0)
    assert spectrum_entropy(np.ones(1)) == pytest.approx(0.0)


def test_schmidt_entropy_of_product_state():
    assert schmidt_entropy(product_state([1, 1, 1]), 1) == 0.0
    with pytest.raises(SiteIndexError):
        schmidt_entropy(product_state([1, 1, 1]), 3)


@pytest.fixture(scope="module")
def evolved_state():
    """Mott state after a short real-time evolution on a uniform chain."""
    from bosechain.model import chain_spec

    state = product_state([1, 1, 1, 1])
    evolve(state, chain_spec(4, 4, "ch", U_mid=1.0), EvolutionParams(dt=0.01, t_total=0.3))
    return state


def test_real_evolution_keeps_canonical_form(evolved_state):
    evolved_state.check()
    assert canonical_error(evolved_state) < 1e-10
    assert norm(evolved_state) == pytest.approx(1.0, abs=1e-10)
    assert evolved_state.chi > 1


def test_canonicalize_is_idempotent_on_canonical_state(evolved_state):
    restored = canonicalize(evolved_state)
    assert canonical_error(restored) < 1e-10
    assert fidelity(restored, evolved_state) == pytest.approx(1.0, abs=1e-12)
    for a, b in zip(restored.bonds, evolved_state.bonds):
        assert np.allclose(np.sort(a.weights), np.sort(b.weights), atol=1e-10)


def test_canonicalize_normalizes(evolved_state):
    scaled = evolved_state.copy()
    scaled.gammas[0].blocks = {key: 3.0 * block for key, block in scaled.gammas[0].blocks.items()}
    assert norm(scaled) == pytest.approx(3.0, rel=1e-10)
    assert norm(canonicalize(scaled)) == pytest.approx(1.0, abs=1e-12)


def test_to_dense_matches_contraction(evolved_state):
    vector = to_dense(evolved_state)
    basis = fock_basis(4, 4)
    n1 = np.sum(np.abs(vector) ** 2 * basis.states[:, 0])
    assert expectation(evolved_state, {1: NUMBER}).real == pytest.approx(n1, abs=1e-12)


def test_truncate_bond_to_single_value(evolved_state):
    state = evolved_state.copy()
    discarded = truncate_bond(state, 2, TruncationPolicy(chi_max=1))
    assert 0 < discarded < 1
    assert state.bond_dimensions[1] == 1
    state.check()
    assert state.bonds[1].weights[0] == pytest.approx(1.0)


def test_check_detects_bad_block_shape():
    state = product_state([1, 1])
    state.gammas[0].blocks[(0, 1)] = np.ones((1, 2), dtype=complex)
    with pytest.raises(CorruptionError):
        state.check()


def test_bond_spectrum_sectors():
    spectrum = BondSpectrum(np.array([0.8, 0.5, 0.3]), np.array([2, 1, 2]))
    sectors = spectrum.sectors()
    assert list(sectors[2]) == [0, 2]
    assert list(sectors[1]) == [1]
    assert spectrum.total_weight() == pytest.approx(0.64 + 0.25 + 0.09)
    assert math.isclose(spectrum.sector_weights()[2][1], 0.3)


def test_truncate_bond_keeps_the_largest_fifty():
    weights = np.linspace(1.0, 0.01, 60)
    weights /= np.linalg.norm(weights)
    state = product_state([59, 0])
    state.bonds[0] = BondSpectrum(weights, np.arange(60))
    state.gammas[0].blocks = {(0, q): np.ones((1, 1), dtype=complex) for q in range(60)}
    state.gammas[1].blocks = {(q, 59): np.ones((1, 1), dtype=complex) for q in range(60)}
    state.check()

    discarded = truncate_bond(state, 1, TruncationPolicy(chi_max=50))

    assert state.bond_dimensions == [50]
    assert discarded == pytest.approx(np.sum(weights[50:] ** 2))
    assert set(state.bonds[0].charges.tolist()) == set(range(50))
    state.check()
