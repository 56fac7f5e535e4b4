"""Trotterized real- and imaginary-time evolution of charge-tagged MPS.

Bond k (1-based) couples sites k and k+1. Bond operators and gates are
block-diagonal in the pair total s = i1 + i2; block s is indexed by the
left occupation i1 = 0..s.
"""

import contextlib
import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    CorruptionError,
    InvalidOperatorError,
    NonConvergenceError,
    SiteIndexError,
    UnsupportedConfigurationError,
)
from .model import LatticeSpec
from .observables import TrajectoryRecord, densities, end_pair_rdm, measure
from .symmps import (
    ANNIHILATE,
    CREATE,
    BondSpectrum,
    CanonicalState,
    Environments,
    SiteTensor,
    TruncationPolicy,
    canonicalize,
    diagonal_op,
    fidelity,
    inverse_sectors,
    norm,
    product_state,
    robust_svd,
    truncation_order,
)

log = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12
NORM_DRIFT_WARNING = 1e-8


class Mode(str, Enum):
    """Evolution in real time (unitary) or imaginary time (projective)."""

    REAL = "real"
    IMAGINARY = "imaginary"


@dataclass
class BondOperator:
    """Two-site operator of one bond, blocked by pair total."""

    bond: int
    blocks: Dict[int, np.ndarray]


@dataclass
class TwoSiteGate:
    """Exponential of a bond operator, blocked by pair total."""

    bond: int
    mode: Mode
    blocks: Dict[int, np.ndarray]


@dataclass(frozen=True)
class EvolutionParams:
    """Knobs of a TEBD run.

    Args:
        dt: time step; defaults to 1e-3/N
        t_total: duration of a real-time run
        tol: imaginary-time convergence threshold on |1 - <psi(τ)|psi(τ+δτ)>|
        policy: truncation policy applied after every gate
        record_every: observer stride in steps
        mode: real or imaginary time
        max_steps: imaginary-time step cap
        discarded_budget: cumulative discarded weight before records are flagged
        canonicalize_every: imaginary-time steps between exact re-canonicalizations
        settle_tol: largest drift per unit imaginary time of the densities and the
            end-pair density matrix accepted once the fidelity test has passed
        workers: threads used for the gates of one parity layer
    """

    dt: Optional[float] = None
    t_total: Optional[float] = None
    tol: float = 1e-14
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    record_every: int = 1
    mode: Mode = Mode.REAL
    max_steps: int = 1_000_000
    discarded_budget: float = 1e-6
    canonicalize_every: int = 100
    settle_tol: float = 1e-10
    workers: int = 1

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise UnsupportedConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.tol > 0:
            raise UnsupportedConfigurationError(f"tol must be positive, got {self.tol}")
        if not self.settle_tol > 0:
            raise UnsupportedConfigurationError(
                f"settle_tol must be positive, got {self.settle_tol}"
            )
        if self.record_every < 1:
            raise UnsupportedConfigurationError("record_every must be at least 1")
        object.__setattr__(self, "mode", Mode(self.mode))

    def step(self, N: int) -> float:
        return self.dt if self.dt is not None else 1e-3 / N


class GroundStateResult(NamedTuple):
    state: CanonicalState
    energy: float
    steps: int
    chi_history: List[int]


@dataclass
class SweepGates:
    """Gates of one second-order sweep: outer layer, inner layer, outer layer."""

    outer: List[TwoSiteGate]
    inner: List[TwoSiteGate]


def bond_hamiltonian(spec: LatticeSpec, bond: int) -> BondOperator:
    """
    Two-site Hamiltonian of one bond.

    Hopping -J_k (a†_2 a_1 + a†_1 a_2) plus the single-site terms of both
    sites, each weighted 1/2 except at the chain ends where the weight is 1,
    so that summing all bonds reproduces the chain Hamiltonian.
    """
    if not 1 <= bond <= spec.N - 1:
        raise SiteIndexError(f"Bond {bond} outside 1..{spec.N - 1}")
    w_left = 1.0 if bond == 1 else 0.5
    w_right = 1.0 if bond == spec.N - 1 else 0.5
    J = spec.J[bond - 1]

    blocks = {}
    for s in range(spec.M + 1):
        i = np.arange(s + 1, dtype=float)
        h = np.diag(w_left * spec.onsite(bond, i) + w_right * spec.onsite(bond + 1, s - i))
        if s:
            # <i+1, s-i-1| a†_1 a_2 |i, s-i>
            hop = -J * np.sqrt((i[:-1] + 1) * (s - i[:-1]))
            h[np.arange(1, s + 1), np.arange(s)] = hop
            h[np.arange(s), np.arange(1, s + 1)] = hop
        blocks[s] = h
    return BondOperator(bond, blocks)


def gate_from_bond(
    h: BondOperator, dt: float, mode: Mode, normalize: bool = False
) -> TwoSiteGate:
    """
    exp(-i h dt) (real) or exp(-h dt) (imaginary), block by block.

    With normalize, imaginary gates are shifted so their largest eigenvalue
    is 1: by e_min for a forward step, by e_max for a backward (dt < 0) one.
    """
    mode = Mode(mode)
    spectra = {}
    for s, block in h.blocks.items():
        if np.max(np.abs(block - block.conj().T)) > HERMITIAN_TOLERANCE:
            raise InvalidOperatorError(f"Bond {h.bond} operator block {s} is not Hermitian")
        spectra[s] = scipy.linalg.eigh(block)

    shift = 0.0
    if normalize and mode is Mode.IMAGINARY:
        if dt >= 0:
            shift = min(float(e.min()) for e, _ in spectra.values())
        else:
            shift = max(float(e.max()) for e, _ in spectra.values())

    blocks = {}
    for s, (e, v) in spectra.items():
        if mode is Mode.REAL:
            factor = np.exp(-1j * e * dt)
        else:
            factor = np.exp(-(e - shift) * dt)
        blocks[s] = (v * factor) @ v.conj().T
    return TwoSiteGate(h.bond, mode, blocks)


def apply_gate(
    state: CanonicalState, gate: TwoSiteGate, policy: TruncationPolicy = TruncationPolicy()
) -> float:
    """
    Apply a two-site gate in place and restore the Vidal form around its bond.

    Builds Θ = λΓλΓλ per charge sector, applies the gate block of each pair
    total, splits Θ by an SVD per middle charge, truncates and divides the
    outer λ back out. In imaginary mode the new spectrum is renormalized.

    Returns:
        Discarded squared weight as a fraction of the total
    """
    b = gate.bond - 1
    if not 0 <= b < state.N - 1:
        raise SiteIndexError(f"Gate bond {gate.bond} outside 1..{state.N - 1}")

    left_spectrum = state.spectrum(b - 1)
    right_spectrum = state.spectrum(b + 1)
    left_w = left_spectrum.sector_weights()
    mid_w = state.bonds[b].sector_weights()
    right_w = right_spectrum.sector_weights()

    right_by_left: Dict[int, list] = {}
    for (qm, qc), block in state.gammas[b + 1].blocks.items():
        right_by_left.setdefault(qm, []).append((qc, block * right_w[qc][None, :]))

    theta: Dict[tuple, np.ndarray] = {}
    for (qa, qm), block in state.gammas[b].blocks.items():
        left_part = (left_w[qa][:, None] * block) * mid_w[qm][None, :]
        for qc, right_part in right_by_left.get(qm, ()):
            arr = theta.get((qa, qc))
            if arr is None:
                shape = (qc - qa + 1, block.shape[0], right_part.shape[1])
                arr = theta[(qa, qc)] = np.zeros(shape, dtype=complex)
            arr[qm - qa] += left_part @ right_part

    rows_of: Dict[int, set] = {}
    cols_of: Dict[int, set] = {}
    for (qa, qc), arr in theta.items():
        g = gate.blocks.get(qc - qa)
        if g is None:
            raise CorruptionError(f"Gate on bond {gate.bond} has no block for total {qc - qa}")
        theta[(qa, qc)] = np.tensordot(g, arr, axes=(1, 0))
        for qm in range(qa, qc + 1):
            rows_of.setdefault(qm, set()).add(qa)
            cols_of.setdefault(qm, set()).add(qc)

    left_dims = {q: len(w) for q, w in left_w.items()}
    right_dims = {q: len(w) for q, w in right_w.items()}
    sectors = []
    for qm in sorted(rows_of):
        row_charges = sorted(rows_of[qm])
        col_charges = sorted(cols_of[qm])
        row_off = dict(zip(row_charges, np.cumsum([0] + [left_dims[q] for q in row_charges])))
        col_off = dict(zip(col_charges, np.cumsum([0] + [right_dims[q] for q in col_charges])))
        matrix = np.zeros(
            (sum(left_dims[q] for q in row_charges), sum(right_dims[q] for q in col_charges)),
            dtype=complex,
        )
        for qa in row_charges:
            for qc in col_charges:
                arr = theta.get((qa, qc))
                if arr is not None:
                    matrix[
                        row_off[qa] : row_off[qa] + left_dims[qa],
                        col_off[qc] : col_off[qc] + right_dims[qc],
                    ] = arr[qm - qa]
        u, s, vh = robust_svd(matrix)
        sectors.append((qm, row_charges, row_off, col_charges, col_off, u, s, vh))

    if not sectors:
        raise CorruptionError(f"Bond {gate.bond} has no charge sectors")
    weights = np.concatenate([sector[6] for sector in sectors])
    charges = np.concatenate([np.full(len(sector[6]), sector[0]) for sector in sectors])
    keep = truncation_order(weights, charges, policy)
    if len(keep) == 0:
        raise CorruptionError(f"Bond {gate.bond} has an empty spectrum after the SVD")

    total = float(np.sum(weights**2))
    kept = weights[keep]
    kept_weight = float(np.sum(kept**2))
    discarded = max(0.0, (total - kept_weight) / total)
    if gate.mode is Mode.IMAGINARY:
        kept = kept / np.sqrt(kept_weight)
    counts = {int(q): int(np.sum(charges[keep] == q)) for q in np.unique(charges[keep])}

    inv_left = inverse_sectors(left_spectrum)
    inv_right = inverse_sectors(right_spectrum)
    new_left = {}
    new_right = {}
    for qm, row_charges, row_off, col_charges, col_off, u, s, vh in sectors:
        k = counts.get(qm, 0)
        if not k:
            continue
        for qa in row_charges:
            block = u[row_off[qa] : row_off[qa] + left_dims[qa], :k] * inv_left[qa][:, None]
            if np.any(block):
                new_left[(qa, qm)] = block
        for qc in col_charges:
            block = vh[:k, col_off[qc] : col_off[qc] + right_dims[qc]] * inv_right[qc][None, :]
            if np.any(block):
                new_right[(qm, qc)] = block

    state.gammas[b] = SiteTensor(new_left)
    state.gammas[b + 1] = SiteTensor(new_right)
    state.bonds[b] = BondSpectrum(kept, charges[keep])
    return discarded


def build_sweep_gates(spec: LatticeSpec, dt: float, mode: Mode) -> SweepGates:
    """
    Gates of a second-order sweep: odd bonds at dt/2, even bonds at dt, odd at dt/2.

    A chain without even bonds (N = 2) gets a single full-step layer.
    """
    mode = Mode(mode)
    normalize = mode is Mode.IMAGINARY
    odd = [bond_hamiltonian(spec, k) for k in range(1, spec.N, 2)]
    even = [bond_hamiltonian(spec, k) for k in range(2, spec.N, 2)]
    if not even:
        return SweepGates([gate_from_bond(h, dt, mode, normalize) for h in odd], [])
    return SweepGates(
        [gate_from_bond(h, dt / 2, mode, normalize) for h in odd],
        [gate_from_bond(h, dt, mode, normalize) for h in even],
    )


def _apply_layer(
    state: CanonicalState,
    gates: Sequence[TwoSiteGate],
    policy: TruncationPolicy,
    executor: Optional[Executor],
) -> List[float]:
    if executor is None or len(gates) < 2:
        return [apply_gate(state, gate, policy) for gate in gates]
    # gates of one parity touch disjoint site tensors and bonds
    return list(executor.map(lambda gate: apply_gate(state, gate, policy), gates))


def _sweep(
    state: CanonicalState,
    gates: SweepGates,
    policy: TruncationPolicy,
    executor: Optional[Executor] = None,
) -> List[float]:
    discarded = _apply_layer(state, gates.outer, policy, executor)
    if gates.inner:
        discarded += _apply_layer(state, gates.inner, policy, executor)
        discarded += _apply_layer(state, gates.outer, policy, executor)
    return discarded


def sweep_second_order(
    state: CanonicalState,
    spec: LatticeSpec,
    dt: float,
    mode: Mode,
    policy: TruncationPolicy = TruncationPolicy(),
    gates: Optional[SweepGates] = None,
    executor: Optional[Executor] = None,
) -> float:
    """One symmetric Trotter step in place; returns the largest discarded weight."""
    gates = gates or build_sweep_gates(spec, dt, mode)
    return max(_sweep(state, gates, policy, executor), default=0.0)


# three second-order sweeps of dt·w compose a fourth-order step
FOURTH_ORDER_WEIGHTS = (
    1 / (2 - 2 ** (1 / 3)),
    -(2 ** (1 / 3)) / (2 - 2 ** (1 / 3)),
    1 / (2 - 2 ** (1 / 3)),
)


def build_imaginary_gates(spec: LatticeSpec, dt: float) -> List[SweepGates]:
    """Sweeps of one fourth-order imaginary-time step; the middle one runs backwards."""
    by_weight = {
        w: build_sweep_gates(spec, w * dt, Mode.IMAGINARY) for w in set(FOURTH_ORDER_WEIGHTS)
    }
    return [by_weight[w] for w in FOURTH_ORDER_WEIGHTS]


def _settle_marker(state: CanonicalState) -> np.ndarray:
    rho = end_pair_rdm(state)
    parts = [np.asarray(densities(state), dtype=complex)]
    parts += [rho.blocks[s].ravel() for s in sorted(rho.blocks)]
    return np.concatenate(parts)


def _drift(before: np.ndarray, after: np.ndarray) -> float:
    if before.shape != after.shape:
        return float("inf")
    return float(np.max(np.abs(after - before)))


def _executor(workers: int):
    if workers > 1:
        return ThreadPoolExecutor(max_workers=workers)
    return contextlib.nullcontext()


def default_occupations(N: int, M: int) -> List[int]:
    """Unit filling when M = N; otherwise M // N per site plus the remainder on central sites."""
    base, remainder = divmod(M, N)
    occupations = [base] * N
    by_centre = sorted(range(N), key=lambda k: (abs(2 * k - (N - 1)), k))
    for k in by_centre[:remainder]:
        occupations[k] += 1
    return occupations


def energy(state: CanonicalState, spec: LatticeSpec) -> float:
    """<H> with every single-site term counted once."""
    env = Environments(state)
    total = 0.0
    for k in range(1, spec.N + 1):
        total += env.expect({k: diagonal_op(lambda n, k=k: spec.onsite(k, n))}).real
    for k, J in enumerate(spec.J, start=1):
        if J:
            total -= 2 * J * env.expect({k: ANNIHILATE, k + 1: CREATE}).real
    return float(total)


def ground_state(
    spec: LatticeSpec,
    params: Optional[EvolutionParams] = None,
    initial: Optional[CanonicalState] = None,
    progress: Optional[Callable[[int, float], None]] = None,
) -> GroundStateResult:
    """
    Imaginary-time evolution until consecutive states agree to params.tol.

    Each step is a fourth-order composition of three second-order sweeps.
    Passing the fidelity test starts a settling stage: every
    canonicalize_every steps the densities and the end-pair density matrix
    are compared with the previous check, and the run stops once their
    largest change per unit imaginary time is below params.settle_tol.

    Args:
        spec: chain Hamiltonian
        params: imaginary-mode parameters
        initial: seed state (default: Mott or balanced product state)
        progress: called as progress(step, |1 - fidelity|) after every step
            of the fidelity stage and as progress(step, drift rate) at every
            settling check

    Returns:
        GroundStateResult(state, energy, steps, chi_history)

    Raises:
        NonConvergenceError: If max_steps is reached; carries the last result
    """
    params = params or EvolutionParams(mode=Mode.IMAGINARY)
    if params.mode is not Mode.IMAGINARY:
        raise UnsupportedConfigurationError("ground_state needs imaginary-time parameters")
    dt = params.step(spec.N)
    state = initial.copy() if initial is not None else product_state(
        default_occupations(spec.N, spec.M)
    )
    if state.N != spec.N or state.M != spec.M:
        raise UnsupportedConfigurationError("Seed state does not match the chain")
    sweeps = build_imaginary_gates(spec, dt)
    settle_every = params.canonicalize_every or 100
    chi_history: List[int] = []
    marker: Optional[np.ndarray] = None
    marker_step = 0

    with _executor(params.workers) as executor:
        for step in range(1, params.max_steps + 1):
            previous = state.copy() if marker is None else None
            for gates in sweeps:
                _sweep(state, gates, params.policy, executor)
            if params.canonicalize_every and step % params.canonicalize_every == 0:
                state = canonicalize(state, params.policy)
            chi_history.append(state.chi)

            if marker is None:
                change = abs(1 - fidelity(previous, state))
                if progress:
                    progress(step, change)
                if change < params.tol:
                    state = canonicalize(state, params.policy)
                    marker, marker_step = _settle_marker(state), step
                    log.debug("Fidelity test passed after %d imaginary steps", step)
                continue

            if step - marker_step < settle_every:
                continue
            state = canonicalize(state, params.policy)
            current = _settle_marker(state)
            rate = _drift(marker, current) / ((step - marker_step) * dt)
            if progress:
                progress(step, rate)
            if rate < params.settle_tol:
                log.debug("Converged after %d imaginary steps (chi=%d)", step, state.chi)
                return GroundStateResult(state, energy(state, spec), step, chi_history)
            marker, marker_step = current, step

    state = canonicalize(state, params.policy)
    result = GroundStateResult(state, energy(state, spec), params.max_steps, chi_history)
    raise NonConvergenceError(
        f"Imaginary-time evolution did not converge in {params.max_steps} steps", result
    )


Observer = Callable[..., TrajectoryRecord]


def evolve(
    state: CanonicalState,
    spec: LatticeSpec,
    params: EvolutionParams,
    observer: Observer = measure,
    progress: Optional[Callable[[int, int], None]] = None,
) -> List[TrajectoryRecord]:
    """
    Real-time evolution of a state in place.

    The observer is called on a snapshot as observer(state, t=..., discarded_cum=...,
    truncation_warning=...) at t = 0, every record_every steps and at the end.
    """
    if params.mode is not Mode.REAL:
        raise UnsupportedConfigurationError("evolve needs real-time parameters")
    dt = params.step(spec.N)
    steps = int(round((params.t_total or 0.0) / dt))
    gates = build_sweep_gates(spec, dt, Mode.REAL)

    records = [observer(state.copy(), t=0.0, discarded_cum=0.0, truncation_warning=False)]
    discarded = 0.0
    warned = False
    with _executor(params.workers) as executor:
        for step in range(1, steps + 1):
            discarded += sum(_sweep(state, gates, params.policy, executor))
            if discarded > params.discarded_budget and not warned:
                warned = True
                log.warning(
                    "Cumulative discarded weight %.3e exceeds the budget %.1e at t=%.6g",
                    discarded, params.discarded_budget, step * dt,
                )
            if step % params.record_every == 0 or step == steps:
                drift = abs(norm(state) - 1)
                if drift > NORM_DRIFT_WARNING:
                    log.warning("Norm drift %.3e at t=%.6g", drift, step * dt)
                records.append(
                    observer(
                        state.copy(), t=step * dt, discarded_cum=discarded, truncation_warning=warned
                    )
                )
            if progress:
                progress(step, steps)
    return records
