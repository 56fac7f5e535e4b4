"""Measured quantities: densities, entropies, end-to-end entanglement, witness.

Site and bond arguments are 1-based.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import entr

from .errors import InvalidDensityError, SiteIndexError
from .symmps import (
    ANNIHILATE,
    CREATE,
    NUMBER,
    CanonicalState,
    Environments,
    close,
    schmidt_entropy,
    site_matrices,
    transfer_left,
)

log = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-9
PT_NEGATIVE_TOLERANCE = 1e-12
WITNESS_AGREEMENT = 1e-10
IMAGINARY_RESIDUE = 1e-8


@dataclass
class PairDensityMatrix:
    """Reduced state of sites 1 and N, block-diagonal in n_1 + n_N.

    blocks[s] is indexed by the site-1 occupation n_1 = 0..s (with n_N = s - n_1);
    rows are kets and columns bras.
    """

    n_max: int
    blocks: Dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_pure(cls, amplitudes: Dict[Tuple[int, int], complex]) -> "PairDensityMatrix":
        """|phi><phi| for phi = sum amplitudes[(n1, nN)] |n1, nN>."""
        n_max = max(a + b for a, b in amplitudes)
        blocks = {s: np.zeros((s + 1, s + 1), dtype=complex) for s in range(n_max + 1)}
        for (a, b), amp in amplitudes.items():
            for (a2, b2), amp2 in amplitudes.items():
                if a + b == a2 + b2:
                    blocks[a + b][a, a2] += amp * np.conj(amp2)
        return cls(n_max=n_max, blocks=blocks).normalized()

    def trace(self) -> float:
        return float(sum(np.trace(block).real for block in self.blocks.values()))

    def normalized(self) -> "PairDensityMatrix":
        total = self.trace()
        return PairDensityMatrix(self.n_max, {s: b / total for s, b in self.blocks.items()})

    def element(self, a: int, b: int, a2: int, b2: int) -> complex:
        """<a, b| rho |a2, b2>."""
        if a + b != a2 + b2 or a + b not in self.blocks:
            return 0j
        return complex(self.blocks[a + b][a, a2])

    def to_dense(self) -> np.ndarray:
        """Full matrix over (n1, nN) with index n1·(n_max+1) + nN."""
        d = self.n_max + 1
        dense = np.zeros((d * d, d * d), dtype=complex)
        for s, block in self.blocks.items():
            for a in range(s + 1):
                for a2 in range(s + 1):
                    dense[a * d + (s - a), a2 * d + (s - a2)] = block[a, a2]
        return dense

    def eigenvalues(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate([scipy.linalg.eigvalsh(block) for block in self.blocks.values()])

    def hermiticity_error(self) -> float:
        return max((float(np.max(np.abs(b - b.conj().T))) for b in self.blocks.values()), default=0.0)


@dataclass
class TrajectoryRecord:
    """Observables at one recorded time; entropies holds the block entropy of every cut."""

    t: float
    densities: List[float]
    zeta: float
    S_half: float
    entropies: List[float]
    S_ends: float
    logneg: float
    eps: float
    chi_max_now: int
    discarded_cum: float
    truncation_warning: bool = False


def _site(state: CanonicalState, k: int) -> int:
    if not 1 <= k <= state.N:
        raise SiteIndexError(f"Site {k} outside 1..{state.N}")
    return k


def local_density(state: CanonicalState, k: int, env: Optional[Environments] = None) -> float:
    """<n_k>."""
    _site(state, k)
    env = env or Environments(state)
    return float(env.expect({k: NUMBER}).real)


def densities(state: CanonicalState, env: Optional[Environments] = None) -> List[float]:
    env = env or Environments(state)
    return [float(env.expect({k: NUMBER}).real) for k in range(1, state.N + 1)]


def zeta(state: CanonicalState, env: Optional[Environments] = None) -> float:
    """Fraction of bosons on the ends, 2<n_1>/M."""
    return 2 * local_density(state, 1, env) / state.M


def block_entropy(state: CanonicalState, l: int) -> float:
    """Entropy (bits) between sites 1..l and l+1..N."""
    return schmidt_entropy(state, l)


def entropy_profile(state: CanonicalState) -> List[float]:
    """Block entropies for every cut l = 1..N-1."""
    return [schmidt_entropy(state, l) for l in range(1, state.N)]


def correlator_adag_a(
    state: CanonicalState, i: int, j: int, env: Optional[Environments] = None
) -> complex:
    """<a†_i a_j>."""
    _site(state, i)
    _site(state, j)
    env = env or Environments(state)
    if i == j:
        return env.expect({i: NUMBER})
    return env.expect({i: CREATE, j: ANNIHILATE})


def end_pair_rdm(state: CanonicalState) -> PairDensityMatrix:
    """
    Reduced density matrix of sites 1 and N.

    For every pair of site-1 occupations (a for the ket, a2 for the bra) the
    left environment is carried through sites 2..N-1 and closed at site N,
    which fixes the site-N occupations from the charges. Only pairs with
    a + b = a2 + b2 can appear.
    """
    N, M = state.N, state.M
    sites = site_matrices(state)
    first, last = sites[0].get(0, {}), sites[-1]

    blocks = {s: np.zeros((s + 1, s + 1), dtype=complex) for s in range(M + 1)}
    for a, ket_block in first.items():
        for a2, bra_block in first.items():
            env = {(a2, a): bra_block.conj().T @ ket_block}
            for site in sites[1 : N - 1]:
                env = transfer_left(env, site, site)
                if not env:
                    break
            for (qb, qk), e in env.items():
                ket_end = last.get(qk, {}).get(M)
                bra_end = last.get(qb, {}).get(M)
                if ket_end is None or bra_end is None:
                    continue
                b, b2 = M - qk, M - qb
                if a + b != a2 + b2:
                    continue
                blocks[a + b][a, a2] += (bra_end.conj().T @ e @ ket_end)[0, 0]

    return PairDensityMatrix(n_max=M, blocks=blocks).normalized()


def _eigenvalues(rho: Union[PairDensityMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(rho, PairDensityMatrix):
        return rho.eigenvalues()
    return scipy.linalg.eigvalsh(np.asarray(rho))


def _clamp(values: np.ndarray) -> np.ndarray:
    if values.size and values.min() < -NEGATIVE_TOLERANCE:
        raise InvalidDensityError(f"Density matrix has eigenvalue {values.min():.3e}")
    return np.clip(values, 0.0, None)


def von_neumann_entropy(rho: Union[PairDensityMatrix, np.ndarray]) -> float:
    """-tr(rho log2 rho)."""
    p = _clamp(_eigenvalues(rho))
    return float(np.sum(entr(p)) / math.log(2))


def partial_transpose_eigenvalues(rho: PairDensityMatrix) -> np.ndarray:
    """
    Eigenvalues of rho transposed on the site-N index.

    The transpose maps the coherence <a,b|rho|a2,b2> to <a,b2|.|a2,b>, so the
    result is block-diagonal in d = n_1 - n_N; each sector is assembled from
    the original blocks with s = a + a2 - d.
    """
    n = rho.n_max
    values = []
    for d in range(-n, n + 1):
        firsts = [a for a in range(n + 1) if 0 <= a - d <= n]
        if not firsts:
            continue
        sector = np.zeros((len(firsts), len(firsts)), dtype=complex)
        for x, a in enumerate(firsts):
            for y, a2 in enumerate(firsts):
                s = a + a2 - d
                if s in rho.blocks and a <= s and a2 <= s:
                    sector[x, y] = rho.blocks[s][a, a2]
        values.append(scipy.linalg.eigvalsh(sector))
    return np.concatenate(values) if values else np.zeros(0)


def log_negativity(rho: PairDensityMatrix) -> float:
    """log2 of the trace norm of the partial transpose."""
    _clamp(rho.eigenvalues())
    trace_norm = float(np.sum(np.abs(partial_transpose_eigenvalues(rho))))
    return max(0.0, math.log2(trace_norm))


def end_marginal(rho: PairDensityMatrix) -> np.ndarray:
    """Occupation distribution of site 1."""
    p = np.zeros(rho.n_max + 1)
    for s, block in rho.blocks.items():
        p[: s + 1] += np.real(np.diag(block))
    return p


def _witness_from_rdm(rho: PairDensityMatrix) -> complex:
    total = 0j
    for s, block in rho.blocks.items():
        for a in range(s):
            total += math.sqrt((a + 1) * (s - a)) * block[a, a + 1]
    return total


def beamsplitter_counts(rho: PairDensityMatrix) -> Tuple[float, float]:
    """Mean counts in the outputs c, d = (a_1 ± a_N)/sqrt(2) of a 50:50 beamsplitter."""
    occupations = 0.0
    for s, block in rho.blocks.items():
        occupations += s * float(np.trace(block).real)
    cross = _witness_from_rdm(rho).real
    return occupations / 2 + cross, occupations / 2 - cross


def witness_routes(state: CanonicalState, env: Optional[Environments] = None) -> Tuple[complex, complex]:
    """<a†_1 a_N> from the end-pair RDM and from the direct correlator."""
    via_rdm = _witness_from_rdm(end_pair_rdm(state))
    via_correlator = correlator_adag_a(state, 1, state.N, env)
    return via_rdm, via_correlator


def epsilon_witness(subject: Union[CanonicalState, PairDensityMatrix]) -> float:
    """
    Entanglement witness Re tr(a†_1 a_N rho); zero for separable states.

    For a state both contraction routes are evaluated and compared.
    """
    if isinstance(subject, PairDensityMatrix):
        value = _witness_from_rdm(subject)
    else:
        value, direct = witness_routes(subject)
        if abs(value - direct) > WITNESS_AGREEMENT:
            log.warning("Witness routes disagree: %s vs %s", value, direct)
    if abs(value.imag) > IMAGINARY_RESIDUE:
        log.warning("Witness has imaginary residue %.3e", value.imag)
    return float(value.real)


def measure(
    state: CanonicalState,
    t: float,
    discarded_cum: float = 0.0,
    truncation_warning: bool = False,
    pair: bool = True,
) -> TrajectoryRecord:
    """Bundle the trajectory observables of a state."""
    env = Environments(state)
    dens = densities(state, env)
    profile = entropy_profile(state)
    if pair:
        rho = end_pair_rdm(state)
        S_ends = von_neumann_entropy(rho)
        logneg = log_negativity(rho)
        eps = float(_witness_from_rdm(rho).real)
    else:
        S_ends = logneg = eps = float("nan")
    return TrajectoryRecord(
        t=t,
        densities=dens,
        zeta=2 * dens[0] / state.M,
        S_half=profile[state.N // 2 - 1],
        entropies=profile,
        S_ends=S_ends,
        logneg=logneg,
        eps=eps,
        chi_max_now=state.chi,
        discarded_cum=discarded_cum,
        truncation_warning=truncation_warning,
    )
