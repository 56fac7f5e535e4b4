"""Exact diagonalization in the fixed-number Fock basis.

Ground truth for small chains: basis enumeration, the Hamiltonian as a sparse
matrix, dense eigensolves, exact evolution, the closed-form condensate of
perfect-transmission chains and single-particle propagation.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from .config import get_oracle_capacity
from .errors import CapacityError, InvalidInputError, SiteIndexError
from .model import DEFAULT_LAMBDA, LatticeSpec, pth_couplings
from .observables import PairDensityMatrix

log = logging.getLogger(__name__)


def basis_size(N: int, M: int) -> int:
    """Number of ways to place M bosons on N sites."""
    return math.comb(N + M - 1, M)


def default_capacity() -> int:
    """Basis capacity, overridable through BOSECHAIN_ORACLE_CAP."""
    return get_oracle_capacity()


@dataclass(frozen=True)
class FockBasis:
    """Occupation lists summing to M, in lexicographic descending order."""

    N: int
    M: int
    states: np.ndarray
    index: Dict[Tuple[int, ...], int]

    @property
    def size(self) -> int:
        return len(self.states)


def _compositions(N: int, M: int) -> Iterator[Tuple[int, ...]]:
    if N == 1:
        yield (M,)
        return
    for first in range(M, -1, -1):
        for rest in _compositions(N - 1, M - first):
            yield (first,) + rest


def fock_basis(N: int, M: int, cap: Optional[int] = None) -> FockBasis:
    """
    Enumerate the number-conserving Fock basis.

    Args:
        N: number of sites
        M: number of bosons
        cap: maximum basis size (default from BOSECHAIN_ORACLE_CAP or 200000)

    Returns:
        FockBasis with states ordered lexicographically descending

    Raises:
        CapacityError: If the basis would exceed the cap
    """
    cap = default_capacity() if cap is None else cap
    if N < 1 or M < 0:
        raise InvalidInputError(f"Invalid basis dimensions N={N}, M={M}")
    size = basis_size(N, M)
    if size > cap:
        raise CapacityError(f"Fock basis for N={N}, M={M} has {size} states, above the cap {cap}")
    states = list(_compositions(N, M))
    return FockBasis(
        N=N,
        M=M,
        states=np.array(states, dtype=int).reshape(len(states), N),
        index={state: position for position, state in enumerate(states)},
    )


def dense_hamiltonian(spec: LatticeSpec, basis: Optional[FockBasis] = None) -> sparse.csr_matrix:
    """
    Hamiltonian of the chain over the Fock basis.

    Returned as a sparse matrix; call `.toarray()` for dense linear algebra.
    """
    basis = basis or fock_basis(spec.N, spec.M)
    states = basis.states
    diagonal = np.zeros(basis.size)
    for k in range(1, spec.N + 1):
        diagonal += spec.onsite(k, states[:, k - 1].astype(float))

    rows: List[int] = []
    cols: List[int] = []
    values: List[float] = []
    for col, state in enumerate(states):
        for k, J in enumerate(spec.J):
            if J == 0 or state[k] == 0:
                continue
            # a†_{k+1} a_k moves one boson to the right
            target = list(state)
            amplitude = -J * math.sqrt(target[k] * (target[k + 1] + 1))
            target[k] -= 1
            target[k + 1] += 1
            row = basis.index[tuple(target)]
            rows += [row, col]
            cols += [col, row]
            values += [amplitude, amplitude]

    hopping = sparse.coo_matrix((values, (rows, cols)), shape=(basis.size, basis.size))
    return (hopping + sparse.diags(diagonal)).tocsr()


def _fix_phase(vector: np.ndarray) -> np.ndarray:
    pivot = vector[np.argmax(np.abs(vector))]
    return vector * (abs(pivot) / pivot)


def exact_ground(spec: LatticeSpec, basis: Optional[FockBasis] = None) -> Tuple[float, np.ndarray]:
    """Lowest eigenpair, with the largest-magnitude amplitude made real positive."""
    basis = basis or fock_basis(spec.N, spec.M)
    H = dense_hamiltonian(spec, basis).toarray()
    energies, vectors = scipy.linalg.eigh(H, subset_by_index=[0, 0])
    return float(energies[0]), _fix_phase(vectors[:, 0].astype(complex))


class ExactPropagator:
    """e^{-iHt} through one cached eigendecomposition."""

    def __init__(self, spec: LatticeSpec, basis: Optional[FockBasis] = None):
        self.spec = spec
        self.basis = basis or fock_basis(spec.N, spec.M)
        self.energies, self.vectors = scipy.linalg.eigh(dense_hamiltonian(spec, self.basis).toarray())

    def evolve(self, psi0: np.ndarray, t: float) -> np.ndarray:
        coefficients = self.vectors.T @ psi0
        return self.vectors @ (np.exp(-1j * self.energies * t) * coefficients)

    def energy(self, psi: np.ndarray) -> float:
        coefficients = self.vectors.T @ psi
        return float(np.sum(self.energies * np.abs(coefficients) ** 2) / np.vdot(psi, psi).real)


def exact_evolve(spec: LatticeSpec, psi0: np.ndarray, t: float) -> np.ndarray:
    """e^{-iHt} psi0 via eigendecomposition."""
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-10:
        raise InvalidInputError("Initial amplitudes must be normalized")
    return ExactPropagator(spec).evolve(psi0, t)


def condensate_mode(N: int, gauge: str = "positive") -> np.ndarray:
    """
    Single-particle amplitudes 2^{-j} sqrt(C(2j, k-1)) of the spin-coherent mode.

    The "printed" gauge multiplies site k by (-1)^(k-1), which is the same
    mode seen through a -> (-1)^k a.
    """
    if gauge not in ("positive", "printed"):
        raise InvalidInputError(f"Unknown gauge {gauge!r}")
    mode = np.array([math.sqrt(math.comb(N - 1, k)) for k in range(N)]) / 2 ** ((N - 1) / 2)
    if gauge == "printed":
        mode = mode * (-1.0) ** np.arange(N)
    return mode


def condensate(mode: np.ndarray, basis: FockBasis) -> np.ndarray:
    """(sum_k c_k a†_k)^M |0> normalized, for a normalized mode c."""
    log_factorial = np.array([math.lgamma(n + 1) for n in range(basis.M + 1)])
    amplitudes = np.empty(basis.size, dtype=complex)
    for position, state in enumerate(basis.states):
        weight = math.exp(0.5 * (log_factorial[basis.M] - log_factorial[state].sum()))
        amplitudes[position] = weight * np.prod(mode.astype(complex) ** state)
    return amplitudes


def pth_closed_form_ground(
    N: int,
    M: int,
    lam: float = DEFAULT_LAMBDA,
    gauge: str = "positive",
    verify_energy: bool = True,
    cap: Optional[int] = None,
) -> np.ndarray:
    """
    Closed-form repulsionless ground state of a perfect-transmission chain.

    With verify_energy the condensate energy is checked against -lam·j·M
    (j = (N-1)/2); only the positive gauge passes, the printed one sits at
    the top of the spectrum.
    """
    basis = fock_basis(N, M, cap)
    psi = condensate(condensate_mode(N, gauge), basis)
    if verify_energy:
        energy = closed_form_energy(N, M, lam, gauge, basis)
        expected = -lam * (N - 1) / 2 * M
        if abs(energy - expected) > 1e-10 * max(1.0, abs(expected)):
            raise InvalidInputError(
                f"Condensate energy {energy} differs from {expected} in the {gauge} gauge"
            )
    return psi


def closed_form_energy(
    N: int, M: int, lam: float = DEFAULT_LAMBDA, gauge: str = "positive",
    basis: Optional[FockBasis] = None,
) -> float:
    """<H> of the closed-form condensate for the repulsionless PTH chain."""
    basis = basis or fock_basis(N, M)
    spec = LatticeSpec(N=N, M=M, U=(0.0,) * N, J=pth_couplings(N, lam))
    psi = condensate(condensate_mode(N, gauge), basis)
    H = dense_hamiltonian(spec, basis)
    return float(np.vdot(psi, H @ psi).real)


def _propagator(J: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    J = np.asarray(J, dtype=float)
    return eigh_tridiagonal(np.zeros(len(J) + 1), J)


def single_particle_propagate(J: Sequence[float], start: int, t: float) -> np.ndarray:
    """
    e^{-iAt} e_start for the tridiagonal hopping matrix A.

    Args:
        J: bond couplings, length N-1
        start: starting site, 1..N
        t: time

    Returns:
        Complex amplitudes over the N sites
    """
    N = len(J) + 1
    if not 1 <= start <= N:
        raise SiteIndexError(f"Start site {start} outside 1..{N}")
    energies, vectors = _propagator(J)
    return vectors @ (np.exp(-1j * energies * t) * vectors[start - 1])


def transfer_fidelity(J: Sequence[float], start: int, times: Sequence[float]) -> np.ndarray:
    """|<mirror(start)|e^{-iAt}|start>|² over a grid of times."""
    N = len(J) + 1
    if not 1 <= start <= N:
        raise SiteIndexError(f"Start site {start} outside 1..{N}")
    energies, vectors = _propagator(J)
    mirror = N + 1 - start
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * np.outer(times, energies))
    amplitudes = phases @ (vectors[mirror - 1] * vectors[start - 1])
    return np.abs(amplitudes) ** 2


def pair_rdm_dense(psi: np.ndarray, basis: FockBasis) -> PairDensityMatrix:
    """Reduced state of sites 1 and N by direct partial trace."""
    groups: Dict[Tuple[int, ...], List[Tuple[int, int, complex]]] = {}
    for amplitude, state in zip(psi, basis.states):
        if amplitude == 0:
            continue
        rest = tuple(state[1:-1]) if basis.N > 2 else ()
        groups.setdefault(rest, []).append((int(state[0]), int(state[-1]), amplitude))

    blocks = {s: np.zeros((s + 1, s + 1), dtype=complex) for s in range(basis.M + 1)}
    for members in groups.values():
        for a, b, amp in members:
            for a2, b2, amp2 in members:
                blocks[a + b][a, a2] += amp * np.conj(amp2)
    rho = PairDensityMatrix(n_max=basis.M, blocks=blocks)
    return rho.normalized()


def dense_density(psi: np.ndarray, basis: FockBasis, k: int) -> float:
    """<n_k> of a dense state (k 1-based)."""
    return float(np.sum(np.abs(psi) ** 2 * basis.states[:, k - 1]) / np.vdot(psi, psi).real)


def dense_correlator(psi: np.ndarray, basis: FockBasis, i: int, j: int) -> complex:
    """<a†_i a_j> of a dense state (1-based sites)."""
    if i == j:
        return complex(dense_density(psi, basis, i))
    total = 0j
    for position, state in enumerate(basis.states):
        if state[j - 1] == 0 or psi[position] == 0:
            continue
        target = list(state)
        factor = math.sqrt(target[j - 1] * (target[i - 1] + 1))
        target[j - 1] -= 1
        target[i - 1] += 1
        total += np.conj(psi[basis.index[tuple(target)]]) * factor * psi[position]
    return total / np.vdot(psi, psi).real
