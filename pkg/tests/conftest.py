"""Pytest configuration and fixtures."""

import json

import pytest

from bosechain.model import LatticeSpec, chain_spec
from bosechain.symmps import product_state
from bosechain.tebd import EvolutionParams, Mode, ground_state

GROUND_DT = 2e-3


@pytest.fixture
def dimer_spec():
    """Two sites, two bosons, unit hopping and repulsion."""
    return LatticeSpec(N=2, M=2, U=(1.0, 1.0), J=(1.0,))


@pytest.fixture
def trimer_spec():
    """Three sites with repulsion everywhere and uneven hopping."""
    return LatticeSpec(N=3, M=3, U=(1.0, 2.0, 1.0), J=(1.0, 0.7))


@pytest.fixture
def mott_state():
    """Four sites with one boson each."""
    return product_state([1, 1, 1, 1])


@pytest.fixture
def imaginary_params():
    return EvolutionParams(dt=GROUND_DT, mode=Mode.IMAGINARY)


@pytest.fixture(scope="session")
def pth4_ground():
    """Repulsionless perfect-transmission ground state, N = M = 4."""
    spec = chain_spec(4, 4, "pth")
    return spec, ground_state(spec, EvolutionParams(dt=GROUND_DT, mode=Mode.IMAGINARY))


@pytest.fixture(scope="session")
def trimer_ground():
    spec = LatticeSpec(N=3, M=3, U=(1.0, 2.0, 1.0), J=(1.0, 0.7))
    return spec, ground_state(spec, EvolutionParams(dt=GROUND_DT, mode=Mode.IMAGINARY))


@pytest.fixture
def write_config(tmp_path):
    """Write a RunConfig document and return its path."""

    def _write(**fields):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(fields))
        return path

    return _write
