"""Charge-tagged matrix product states in Vidal canonical form.

A state of N sites holding M bosons is stored as N site tensors Γ and N-1
bond spectra λ. Every Schmidt vector carries a charge: the number of bosons
to the left of its bond. A Γ entry (α, i, β) can only be nonzero when
charge(α) + i = charge(β), so Γ is stored as dense matrices keyed by the
pair (left charge, right charge); the occupation i is implied by the key.

Bonds are stored 0-based internally (bond b sits between sites b and b+1);
public functions take 1-based bond and site indices.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.special import entr

from .errors import CorruptionError, InvalidInputError, ShapeMismatchError, SiteIndexError

log = logging.getLogger(__name__)

DEFAULT_REL_THRESHOLD = 1e-14
LAMBDA_GUARD = 1e-12

Key = Tuple[int, int]
Blocks = Dict[Key, np.ndarray]
Environment = Dict[Key, np.ndarray]
SiteMatrix = Dict[int, Dict[int, np.ndarray]]


@dataclass(frozen=True)
class TruncationPolicy:
    """Which Schmidt values survive a bond update.

    Args:
        rel_threshold: values at or below rel_threshold × (largest value) are dropped
        chi_max: optional cap on the number of values kept per bond
    """

    rel_threshold: float = DEFAULT_REL_THRESHOLD
    chi_max: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.rel_threshold < 1:
            raise InvalidInputError(f"rel_threshold must lie in (0, 1), got {self.rel_threshold}")
        if self.chi_max is not None and self.chi_max < 1:
            raise InvalidInputError(f"chi_max must be at least 1, got {self.chi_max}")


@dataclass
class BondSpectrum:
    """Schmidt values of one bond, sorted descending, with their charges."""

    weights: np.ndarray
    charges: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.charges = np.asarray(self.charges, dtype=int)
        if self.weights.shape != self.charges.shape or self.weights.ndim != 1:
            raise InvalidInputError("Schmidt weights and charges must be matching 1-d arrays")

    @classmethod
    def single(cls, charge: int) -> "BondSpectrum":
        return cls(np.ones(1), np.array([charge]))

    def __len__(self) -> int:
        return len(self.weights)

    def sectors(self) -> Dict[int, np.ndarray]:
        """Positions of the Schmidt vectors of every charge, in bond order."""
        return {int(q): np.flatnonzero(self.charges == q) for q in np.unique(self.charges)}

    def sector_weights(self) -> Dict[int, np.ndarray]:
        return {q: self.weights[idx] for q, idx in self.sectors().items()}

    def entries(self) -> List[Tuple[float, int]]:
        return [(float(w), int(q)) for w, q in zip(self.weights, self.charges)]

    def total_weight(self) -> float:
        return float(np.sum(self.weights**2))

    def copy(self) -> "BondSpectrum":
        return BondSpectrum(self.weights.copy(), self.charges.copy())


@dataclass
class SiteTensor:
    """Γ of one site as dense blocks keyed by (left charge, right charge)."""

    blocks: Blocks = field(default_factory=dict)

    def entries(
        self, left: BondSpectrum, right: BondSpectrum
    ) -> Iterator[Tuple[Tuple[int, int, int], complex]]:
        """Yield ((left index, occupation, right index), amplitude) for every stored entry."""
        left_sectors = left.sectors()
        right_sectors = right.sectors()
        for (ql, qr), block in sorted(self.blocks.items()):
            rows = left_sectors[ql]
            cols = right_sectors[qr]
            for a, alpha in enumerate(rows):
                for b, beta in enumerate(cols):
                    yield (int(alpha), qr - ql, int(beta)), complex(block[a, b])

    def copy(self) -> "SiteTensor":
        return SiteTensor({key: block.copy() for key, block in self.blocks.items()})


@dataclass
class CanonicalState:
    """Vidal-form MPS of N sites and M bosons.

    The left boundary charge is 0 and the right boundary charge is M; both
    boundaries carry a single Schmidt value 1.
    """

    N: int
    M: int
    gammas: List[SiteTensor]
    bonds: List[BondSpectrum]

    def spectrum(self, b: int) -> BondSpectrum:
        """Spectrum of storage bond b, with b = -1 and b = N-1 the boundaries."""
        if b == -1:
            return BondSpectrum.single(0)
        if b == self.N - 1:
            return BondSpectrum.single(self.M)
        return self.bonds[b]

    def copy(self) -> "CanonicalState":
        return CanonicalState(
            self.N,
            self.M,
            [gamma.copy() for gamma in self.gammas],
            [bond.copy() for bond in self.bonds],
        )

    @property
    def bond_dimensions(self) -> List[int]:
        return [len(bond) for bond in self.bonds]

    @property
    def chi(self) -> int:
        return max(self.bond_dimensions, default=1)

    def check(self) -> None:
        """Verify charge rule, boundary charges and block shapes."""
        if len(self.gammas) != self.N or len(self.bonds) != self.N - 1:
            raise CorruptionError("Wrong number of site tensors or bonds")
        for n, gamma in enumerate(self.gammas):
            left = self.spectrum(n - 1).sectors()
            right = self.spectrum(n).sectors()
            for (ql, qr), block in gamma.blocks.items():
                if not 0 <= qr - ql <= self.M:
                    raise CorruptionError(f"Site {n + 1}: block ({ql}, {qr}) breaks the charge rule")
                if ql not in left or qr not in right:
                    raise CorruptionError(f"Site {n + 1}: block ({ql}, {qr}) has no Schmidt vectors")
                if block.shape != (len(left[ql]), len(right[qr])):
                    raise CorruptionError(f"Site {n + 1}: block ({ql}, {qr}) has the wrong shape")


class LocalOp(NamedTuple):
    """Single-site operator diagonal up to a shift of the occupation.

    Maps |i> to weight(i) |i + shift>.
    """

    shift: int
    weight: Callable[[int], float]


CREATE = LocalOp(1, lambda i: math.sqrt(i + 1))
ANNIHILATE = LocalOp(-1, lambda i: math.sqrt(i))
NUMBER = LocalOp(0, float)


def diagonal_op(fn: Callable[[int], float]) -> LocalOp:
    return LocalOp(0, fn)


def _check_bond(state: CanonicalState, bond: int) -> int:
    if not 1 <= bond <= state.N - 1:
        raise SiteIndexError(f"Bond {bond} outside 1..{state.N - 1}")
    return bond - 1


def _check_site(state: CanonicalState, site: int) -> int:
    if not 1 <= site <= state.N:
        raise SiteIndexError(f"Site {site} outside 1..{state.N}")
    return site - 1


def inverse_weights(weights: np.ndarray, reference: float) -> np.ndarray:
    """1/λ with entries below LAMBDA_GUARD × reference treated as absent."""
    inverse = np.zeros_like(weights)
    mask = weights >= LAMBDA_GUARD * reference
    inverse[mask] = 1.0 / weights[mask]
    if not mask.all():
        log.debug("λ guard dropped %d of %d Schmidt values", int((~mask).sum()), len(weights))
    return inverse


def inverse_sectors(spectrum: BondSpectrum) -> Dict[int, np.ndarray]:
    reference = float(spectrum.weights.max()) if len(spectrum) else 0.0
    return {q: inverse_weights(w, reference) for q, w in spectrum.sector_weights().items()}


def truncation_order(
    weights: np.ndarray, charges: np.ndarray, policy: TruncationPolicy
) -> np.ndarray:
    """
    Indices of the Schmidt values to keep, in bond order.

    Sorts by descending weight, breaking ties by lower charge and then input
    order, and applies the relative threshold followed by the chi cap.
    """
    if len(weights) == 0:
        return np.zeros(0, dtype=int)
    order = np.lexsort((np.arange(len(weights)), charges, -weights))
    ranked = weights[order]
    keep = order[ranked > policy.rel_threshold * ranked[0]]
    if policy.chi_max is not None:
        keep = keep[: policy.chi_max]
    return keep


def robust_svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD, falling back to the slower gesvd driver when gesdd fails."""
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        log.warning("gesdd did not converge on a %s block, retrying with gesvd", matrix.shape)
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def product_state(occupations: Sequence[int]) -> CanonicalState:
    """Fock product state with the given occupation on every site."""
    occupations = [int(n) for n in occupations]
    if not occupations:
        raise InvalidInputError("A product state needs at least one site")
    if any(n < 0 for n in occupations):
        raise InvalidInputError(f"Occupations must be nonnegative, got {occupations}")

    charges = np.cumsum([0] + occupations)
    gammas = [
        SiteTensor({(int(charges[n]), int(charges[n + 1])): np.ones((1, 1), dtype=complex)})
        for n in range(len(occupations))
    ]
    bonds = [BondSpectrum.single(int(q)) for q in charges[1:-1]]
    return CanonicalState(len(occupations), int(charges[-1]), gammas, bonds)


def site_matrices(state: CanonicalState) -> List[SiteMatrix]:
    """Γ_n λ_n per site, grouped as {left charge: {right charge: block}}."""
    result = []
    for n in range(state.N):
        right = state.spectrum(n).sector_weights()
        grouped: SiteMatrix = {}
        for (ql, qr), block in state.gammas[n].blocks.items():
            grouped.setdefault(ql, {})[qr] = block * right[qr][None, :]
        result.append(grouped)
    return result


def _by_right(site: SiteMatrix) -> SiteMatrix:
    grouped: SiteMatrix = {}
    for ql, row in site.items():
        for qr, block in row.items():
            grouped.setdefault(qr, {})[ql] = block
    return grouped


def _accumulate(out: Environment, key: Key, term: np.ndarray) -> None:
    if key in out:
        out[key] = out[key] + term
    else:
        out[key] = term


def transfer_left(
    env: Environment, bra: SiteMatrix, ket: SiteMatrix, op: Optional[LocalOp] = None
) -> Environment:
    """Extend a left environment keyed by (bra charge, ket charge) through one site."""
    shift = op.shift if op is not None else 0
    out: Environment = {}
    for (qb, qk), e in env.items():
        bra_row = bra.get(qb)
        if not bra_row:
            continue
        for qk_right, k_block in ket.get(qk, {}).items():
            i = qk_right - qk
            if i + shift < 0:
                continue
            b_block = bra_row.get(qb + i + shift)
            if b_block is None:
                continue
            term = b_block.conj().T @ e @ k_block
            if op is not None:
                term = term * op.weight(i)
            _accumulate(out, (qb + i + shift, qk_right), term)
    return out


def transfer_right(
    env: Environment, bra_by_right: SiteMatrix, ket_by_right: SiteMatrix
) -> Environment:
    """Extend a right environment one site to the left (identity operator)."""
    out: Environment = {}
    for (qb, qk), e in env.items():
        bra_col = bra_by_right.get(qb)
        if not bra_col:
            continue
        for qk_left, k_block in ket_by_right.get(qk, {}).items():
            b_block = bra_col.get(qb - (qk - qk_left))
            if b_block is None:
                continue
            term = b_block.conj() @ e @ k_block.T
            _accumulate(out, (qb - (qk - qk_left), qk_left), term)
    return out


def close(left: Environment, right: Environment) -> complex:
    """Contract a left and a right environment over the same bond."""
    total = 0j
    for key, e in left.items():
        r = right.get(key)
        if r is not None:
            total += complex(np.sum(e * r))
    return total


def _boundary_left() -> Environment:
    return {(0, 0): np.ones((1, 1), dtype=complex)}


def _boundary_right(M: int) -> Environment:
    return {(M, M): np.ones((1, 1), dtype=complex)}


def overlap(bra: CanonicalState, ket: CanonicalState) -> complex:
    """<bra|ket> by left-to-right transfer contraction."""
    if bra.N != ket.N or bra.M != ket.M:
        raise ShapeMismatchError(
            f"Cannot overlap states with (N, M) = ({bra.N}, {bra.M}) and ({ket.N}, {ket.M})"
        )
    bra_sites = site_matrices(bra)
    ket_sites = site_matrices(ket) if ket is not bra else bra_sites
    env = _boundary_left()
    for b_site, k_site in zip(bra_sites, ket_sites):
        env = transfer_left(env, b_site, k_site)
    block = env.get((bra.M, ket.M))
    return complex(block[0, 0]) if block is not None else 0j


def norm(state: CanonicalState) -> float:
    """<psi|psi>^(1/2)."""
    return math.sqrt(max(overlap(state, state).real, 0.0))


def fidelity(a: CanonicalState, b: CanonicalState) -> float:
    """|<a|b>| of the normalized states, in [0, 1]."""
    value = abs(overlap(a, b)) / (norm(a) * norm(b))
    return min(value, 1.0)


class Environments:
    """Cached identity environments of one state for local expectation values."""

    def __init__(self, state: CanonicalState):
        self.state = state
        self.sites = site_matrices(state)
        by_right = [_by_right(site) for site in self.sites]

        self.left: List[Environment] = [_boundary_left()]
        for site in self.sites:
            self.left.append(transfer_left(self.left[-1], site, site))

        self.right: List[Environment] = [_boundary_right(state.M)]
        for site in reversed(by_right):
            self.right.append(transfer_right(self.right[-1], site, site))
        self.right.reverse()

        self.norm2 = close(self.left[-1], _boundary_right(state.M)).real
        if self.norm2 <= 0:
            raise CorruptionError("State has zero norm")

    def expect(self, ops: Dict[int, LocalOp]) -> complex:
        """<prod_k op_k> for ops keyed by 1-based site, normalized by <psi|psi>."""
        first = min(ops) - 1
        last = max(ops) - 1
        env = self.left[first]
        for n in range(first, last + 1):
            env = transfer_left(env, self.sites[n], self.sites[n], ops.get(n + 1))
        return close(env, self.right[last + 1]) / self.norm2


def expectation(state: CanonicalState, ops: Dict[int, LocalOp]) -> complex:
    """<prod_k op_k> with ops keyed by 1-based site."""
    for site in ops:
        _check_site(state, site)
    return Environments(state).expect(ops)


def truncate_bond(state: CanonicalState, bond: int, policy: TruncationPolicy) -> float:
    """
    Apply a truncation policy to one bond in place.

    Args:
        state: state to modify
        bond: bond index, 1..N-1
        policy: truncation policy

    Returns:
        Discarded squared weight as a fraction of the bond's total weight
    """
    b = _check_bond(state, bond)
    spectrum = state.bonds[b]
    keep = truncation_order(spectrum.weights, spectrum.charges, policy)
    if len(keep) == 0:
        raise CorruptionError(f"Bond {bond} has an empty spectrum after truncation")

    total = spectrum.total_weight()
    kept = spectrum.weights[keep]
    kept_weight = float(np.sum(kept**2))
    discarded = max(0.0, (total - kept_weight) / total)

    local: Dict[int, np.ndarray] = {}
    old_sectors = spectrum.sectors()
    for q, positions in old_sectors.items():
        chosen = keep[spectrum.charges[keep] == q]
        if len(chosen):
            local[q] = np.searchsorted(positions, chosen)

    left, right = state.gammas[b], state.gammas[b + 1]
    left.blocks = {
        (ql, qr): block[:, local[qr]] for (ql, qr), block in left.blocks.items() if qr in local
    }
    right.blocks = {
        (ql, qr): block[local[ql], :] for (ql, qr), block in right.blocks.items() if ql in local
    }
    state.bonds[b] = BondSpectrum(kept / math.sqrt(kept_weight), spectrum.charges[keep])
    return discarded


def canonicalize(
    state: CanonicalState, policy: TruncationPolicy = TruncationPolicy()
) -> CanonicalState:
    """
    Restore the exact Vidal form and unit norm.

    Runs a left-to-right QR sweep over Γλ, then a right-to-left SVD sweep per
    charge sector that recovers the Schmidt spectra. Returns a new state.
    """
    N, M = state.N, state.M
    mats: List[Blocks] = []
    for n in range(N):
        right = state.spectrum(n).sector_weights()
        mats.append(
            {(ql, qr): block * right[qr][None, :] for (ql, qr), block in state.gammas[n].blocks.items()}
        )

    for n in range(N - 1):
        grouped: Dict[int, List[Tuple[int, np.ndarray]]] = {}
        for (ql, qr), block in sorted(mats[n].items()):
            grouped.setdefault(qr, []).append((ql, block))
        isometry: Blocks = {}
        carry: Dict[int, np.ndarray] = {}
        for qr, items in grouped.items():
            q, r = scipy.linalg.qr(np.vstack([block for _, block in items]), mode="economic")
            offset = 0
            for ql, block in items:
                isometry[(ql, qr)] = q[offset : offset + block.shape[0]]
                offset += block.shape[0]
            carry[qr] = r
        mats[n] = isometry
        mats[n + 1] = {
            (ql, qr): carry[ql] @ block for (ql, qr), block in mats[n + 1].items() if ql in carry
        }

    total = math.sqrt(sum(float(np.sum(np.abs(block) ** 2)) for block in mats[N - 1].values()))
    if total == 0:
        raise CorruptionError("Cannot canonicalize a state of zero norm")
    mats[N - 1] = {key: block / total for key, block in mats[N - 1].items()}

    gammas: List[Optional[SiteTensor]] = [None] * N
    bonds: List[Optional[BondSpectrum]] = [None] * (N - 1)
    right_inverse = {M: np.ones(1)}
    for n in range(N - 1, 0, -1):
        grouped = {}
        for (ql, qr), block in sorted(mats[n].items()):
            grouped.setdefault(ql, []).append((qr, block))
        sectors = []
        for ql, items in grouped.items():
            u, s, vh = robust_svd(np.hstack([block for _, block in items]))
            sectors.append((ql, items, u, s, vh))
        if not sectors:
            raise CorruptionError(f"Bond {n} lost every Schmidt vector")

        weights = np.concatenate([s for _, _, _, s, _ in sectors])
        charges = np.concatenate([np.full(len(s), ql) for ql, _, _, s, _ in sectors])
        keep = truncation_order(weights, charges, policy)
        if len(keep) == 0:
            raise CorruptionError(f"Bond {n} has an empty spectrum after canonicalization")
        kept = weights[keep]
        spectrum = BondSpectrum(kept / np.sqrt(np.sum(kept**2)), charges[keep])
        counts = {int(q): int(np.sum(charges[keep] == q)) for q in np.unique(charges[keep])}

        gamma_blocks: Blocks = {}
        carry = {}
        for ql, items, u, s, vh in sectors:
            k = counts.get(ql, 0)
            if k == 0:
                continue
            offset = 0
            for qr, block in items:
                width = block.shape[1]
                gamma_blocks[(ql, qr)] = vh[:k, offset : offset + width] * right_inverse[qr][None, :]
                offset += width
            carry[ql] = u[:, :k] * s[None, :k]
        gammas[n] = SiteTensor(gamma_blocks)
        bonds[n - 1] = spectrum
        right_inverse = inverse_sectors(spectrum)
        mats[n - 1] = {
            (qa, ql): block @ carry[ql] for (qa, ql), block in mats[n - 1].items() if ql in carry
        }

    gammas[0] = SiteTensor(
        {(ql, qr): block * right_inverse[qr][None, :] for (ql, qr), block in mats[0].items()}
    )
    return CanonicalState(N, M, gammas, bonds)


def canonical_error(state: CanonicalState) -> float:
    """Largest deviation from left and right orthonormality over all sites."""
    worst = 0.0
    for n in range(state.N):
        left = state.spectrum(n - 1).sector_weights()
        right = state.spectrum(n).sector_weights()
        left_sums: Dict[int, np.ndarray] = {}
        right_sums: Dict[int, np.ndarray] = {}
        for (ql, qr), block in state.gammas[n].blocks.items():
            a = left[ql][:, None] * block
            _accumulate(left_sums, (qr, qr), a.conj().T @ a)
            b = block * right[qr][None, :]
            _accumulate(right_sums, (ql, ql), b @ b.conj().T)
        for q, w in right.items():
            gram = left_sums.get((q, q), np.zeros((len(w), len(w))))
            worst = max(worst, float(np.max(np.abs(gram - np.eye(len(w))))))
        for q, w in left.items():
            gram = right_sums.get((q, q), np.zeros((len(w), len(w))))
            worst = max(worst, float(np.max(np.abs(gram - np.eye(len(w))))))
    return worst


def to_dense(state: CanonicalState, cap: Optional[int] = None) -> np.ndarray:
    """Amplitudes over the Fock basis of oracle.fock_basis(N, M)."""
    from .oracle import fock_basis

    basis = fock_basis(state.N, state.M, cap)
    sites = site_matrices(state)
    vector = np.zeros(basis.size, dtype=complex)
    occupation: List[int] = []

    def walk(n: int, charge: int, row: np.ndarray) -> None:
        if n == state.N:
            vector[basis.index[tuple(occupation)]] = row[0]
            return
        for q_right, block in sites[n].get(charge, {}).items():
            occupation.append(q_right - charge)
            walk(n + 1, q_right, row @ block)
            occupation.pop()

    walk(0, 0, np.ones(1, dtype=complex))
    return vector


def schmidt_entropy(state: CanonicalState, bond: int) -> float:
    """Entanglement entropy (bits) across a bond, from its Schmidt spectrum."""
    b = _check_bond(state, bond)
    return spectrum_entropy(state.bonds[b].weights)


def spectrum_entropy(weights: np.ndarray) -> float:
    """-sum p log2 p with p = λ² normalized."""
    p = np.asarray(weights, dtype=float) ** 2
    total = p.sum()
    if total <= 0:
        return 0.0
    return float(np.sum(entr(p / total)) / math.log(2))
