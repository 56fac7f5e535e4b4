"""Tests for measured quantities."""

import math

import numpy as np
import pytest

from bosechain.errors import InvalidDensityError, SiteIndexError
from bosechain.observables import (
    PairDensityMatrix,
    beamsplitter_counts,
    block_entropy,
    correlator_adag_a,
    densities,
    end_marginal,
    end_pair_rdm,
    entropy_profile,
    epsilon_witness,
    local_density,
    log_negativity,
    measure,
    partial_transpose_eigenvalues,
    von_neumann_entropy,
    witness_routes,
    zeta,
)
from bosechain.oracle import dense_correlator, fock_basis, pair_rdm_dense
from bosechain.symmps import product_state, to_dense


@pytest.fixture
def bell_rdm():
    """One boson shared equally between the ends."""
    return PairDensityMatrix.from_pure({(1, 0): 1 / math.sqrt(2), (0, 1): 1 / math.sqrt(2)})


def test_bell_state_log_negativity(bell_rdm):
    assert log_negativity(bell_rdm) == pytest.approx(1.0)
    assert partial_transpose_eigenvalues(bell_rdm).min() == pytest.approx(-0.5)


def test_bell_state_is_pure(bell_rdm):
    assert von_neumann_entropy(bell_rdm) == pytest.approx(0.0, abs=1e-12)
    assert bell_rdm.trace() == pytest.approx(1.0)
    assert bell_rdm.hermiticity_error() == 0.0


def test_bell_state_witness(bell_rdm):
    assert epsilon_witness(bell_rdm) == pytest.approx(0.5)
    assert beamsplitter_counts(bell_rdm) == pytest.approx((1.0, 0.0))


def test_fock_pair_is_separable():
    rho = PairDensityMatrix.from_pure({(2, 1): 1.0})
    assert log_negativity(rho) == 0.0
    assert epsilon_witness(rho) == 0.0
    assert partial_transpose_eigenvalues(rho).min() >= -1e-12
    assert list(end_marginal(rho)) == pytest.approx([0.0, 0.0, 1.0, 0.0])


def test_negative_density_is_rejected():
    rho = PairDensityMatrix(1, {0: np.array([[0.5]]), 1: np.array([[1.0, 0.0], [0.0, -0.5]])})
    with pytest.raises(InvalidDensityError):
        von_neumann_entropy(rho)


def test_to_dense_layout(bell_rdm):
    dense = bell_rdm.to_dense()
    # index n1·(n_max+1) + nN with n_max = 1
    assert dense[2, 1] == pytest.approx(0.5)
    assert np.trace(dense).real == pytest.approx(1.0)


def test_product_state_observables():
    state = product_state([2, 0, 1])
    assert densities(state) == pytest.approx([2.0, 0.0, 1.0])
    assert zeta(state) == pytest.approx(4 / 3)
    assert abs(epsilon_witness(state)) < 1e-12
    rho = end_pair_rdm(state)
    assert rho.element(2, 1, 2, 1) == pytest.approx(1.0)
    assert log_negativity(rho) == 0.0
    assert entropy_profile(state) == [0.0, 0.0]


def test_local_density_rejects_bad_site():
    with pytest.raises(SiteIndexError):
        local_density(product_state([1, 1]), 0)


def test_pair_rdm_matches_oracle(trimer_ground):
    spec, result = trimer_ground
    basis = fock_basis(3, 3)
    expected = pair_rdm_dense(to_dense(result.state), basis)
    rho = end_pair_rdm(result.state)
    assert np.max(np.abs(rho.to_dense() - expected.to_dense())) < 1e-10
    assert rho.trace() == pytest.approx(1.0)


def test_dimer_pair_rdm_is_the_whole_state(dimer_spec, imaginary_params):
    from bosechain.tebd import ground_state

    state = ground_state(dimer_spec, imaginary_params).state
    rho = end_pair_rdm(state)
    assert von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-9)
    assert log_negativity(rho) > 0


def test_witness_routes_agree(trimer_ground):
    _, result = trimer_ground
    via_rdm, direct = witness_routes(result.state)
    assert abs(via_rdm - direct) < 1e-10
    expected = dense_correlator(to_dense(result.state), fock_basis(3, 3), 1, 3)
    assert epsilon_witness(result.state) == pytest.approx(expected.real, abs=1e-10)


def test_correlator_is_hermitian(trimer_ground):
    _, result = trimer_ground
    forward = correlator_adag_a(result.state, 1, 2)
    backward = correlator_adag_a(result.state, 2, 1)
    assert forward == pytest.approx(np.conj(backward), abs=1e-12)


def test_condensate_end_observables(pth4_ground):
    _, result = pth4_ground
    assert zeta(result.state) == pytest.approx(0.25, abs=1e-8)
    assert epsilon_witness(result.state) == pytest.approx(0.5, abs=1e-8)


def test_log_negativity_matches_partial_transpose_sign(pth4_ground):
    _, result = pth4_ground
    rho = end_pair_rdm(result.state)
    negative = partial_transpose_eigenvalues(rho).min() < -1e-12
    assert (log_negativity(rho) > 0) == negative


def test_block_entropy_profile_is_mirror_symmetric(pth4_ground):
    _, result = pth4_ground
    profile = entropy_profile(result.state)
    assert profile[0] == pytest.approx(profile[2], abs=1e-8)
    assert block_entropy(result.state, 2) == profile[1]


def test_measure_bundles_record(pth4_ground):
    _, result = pth4_ground
    record = measure(result.state, t=0.5, discarded_cum=1e-9)
    assert record.t == 0.5
    assert len(record.densities) == 4
    assert record.zeta == pytest.approx(2 * record.densities[0] / 4)
    assert record.eps == pytest.approx(0.5, abs=1e-8)
    assert len(record.entropies) == 3
    assert record.S_half == record.entropies[1]
    assert record.entropies[0] == pytest.approx(record.entropies[2], abs=1e-10)
    assert record.chi_max_now == result.state.chi
    assert not record.truncation_warning


def test_measure_without_pair_observables():
    record = measure(product_state([1, 1]), t=0.0, pair=False)
    assert math.isnan(record.logneg)
    assert record.densities == pytest.approx([1.0, 1.0])
