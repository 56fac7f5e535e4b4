"""Bose-Hubbard chain specifications.

Sites and bonds are 1-indexed in every public function of this module:
site k runs over 1..N and bond k couples sites k and k+1.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence, Tuple

from .errors import InvalidSizeError, InvalidSpecError, SiteIndexError, UnsupportedConfigurationError

DEFAULT_LAMBDA = 2.0
MOTT_THRESHOLD = 5.8


class Profile(str, Enum):
    """Hopping profiles."""

    CH = "ch"
    PTH = "pth"


class Regime(str, Enum):
    """Mean-field phase labels."""

    MOTT = "mott"
    SUPERFLUID = "superfluid"


@dataclass(frozen=True)
class LocalPotential:
    """On-site potential lin·n + quad·n²."""

    lin: float = 0.0
    quad: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.lin) and math.isfinite(self.quad)):
            raise InvalidSpecError(f"Potential coefficients must be finite: {self}")

    def __call__(self, n):
        return self.lin * n + self.quad * n * n

    @property
    def is_zero(self) -> bool:
        return self.lin == 0.0 and self.quad == 0.0


@dataclass(frozen=True)
class LatticeSpec:
    """Full parameterization of an open chain Hamiltonian.

    Args:
        N: number of sites (≥ 2)
        M: total number of bosons (≥ 1)
        U: on-site repulsion per site, length N
        J: hopping per bond, length N-1, all nonnegative
        V: local potentials per site, length N (defaults to zero)
    """

    N: int
    M: int
    U: Tuple[float, ...]
    J: Tuple[float, ...]
    V: Tuple[LocalPotential, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "U", tuple(float(u) for u in self.U))
        object.__setattr__(self, "J", tuple(float(j) for j in self.J))
        if not self.V:
            object.__setattr__(self, "V", tuple(LocalPotential() for _ in range(self.N)))
        else:
            object.__setattr__(self, "V", tuple(self.V))

        if self.N < 2:
            raise InvalidSizeError(f"A chain needs at least 2 sites, got N={self.N}")
        if self.M < 1:
            raise InvalidSizeError(f"A chain needs at least 1 boson, got M={self.M}")
        if len(self.U) != self.N:
            raise InvalidSpecError(f"Expected {self.N} repulsion values, got {len(self.U)}")
        if len(self.J) != self.N - 1:
            raise InvalidSpecError(f"Expected {self.N - 1} hopping values, got {len(self.J)}")
        if len(self.V) != self.N:
            raise InvalidSpecError(f"Expected {self.N} local potentials, got {len(self.V)}")
        if not all(math.isfinite(u) for u in self.U):
            raise InvalidSpecError("Repulsion values must be finite")
        if not all(math.isfinite(j) and j >= 0 for j in self.J):
            raise InvalidSpecError("Hopping values must be finite and nonnegative")

    def with_potentials(self, V: Sequence[LocalPotential]) -> "LatticeSpec":
        """Return a copy with the local potentials replaced."""
        return replace(self, V=tuple(V))

    def onsite(self, k: int, n):
        """Single-site energy U_k/2 n(n-1) + V_k(n) for site k (1-indexed)."""
        return 0.5 * self.U[k - 1] * n * (n - 1) + self.V[k - 1](n)

    @property
    def is_mirror_symmetric(self) -> bool:
        return (
            self.U == self.U[::-1]
            and self.J == self.J[::-1]
            and self.V == self.V[::-1]
        )


def _check_size(N: int) -> None:
    if N < 2:
        raise InvalidSizeError(f"A chain needs at least 2 sites, got N={N}")


def uniform_couplings(N: int, J0: float = 1.0) -> Tuple[float, ...]:
    """Constant hopping profile: N-1 bonds of strength J0."""
    _check_size(N)
    if J0 < 0:
        raise InvalidSpecError(f"Hopping must be nonnegative, got {J0}")
    return tuple(float(J0) for _ in range(N - 1))


def pth_couplings(N: int, lam: float = DEFAULT_LAMBDA) -> Tuple[float, ...]:
    """
    Perfect-transmission hopping J_k = (lam/2) sqrt(k (N - k)).

    These are the matrix elements of lam·J_x for spin j = (N-1)/2, so a single
    particle is mirrored across the chain at t = pi/lam.
    """
    _check_size(N)
    if not lam > 0:
        raise InvalidSpecError(f"lambda must be positive, got {lam}")
    return tuple(0.5 * lam * math.sqrt(k * (N - k)) for k in range(1, N))


def end_open_repulsion(N: int, U_mid: float) -> Tuple[float, ...]:
    """Repulsion U_mid on intermediate sites, zero on both ends."""
    _check_size(N)
    if U_mid < 0:
        raise InvalidSpecError(f"Repulsion must be nonnegative, got {U_mid}")
    return tuple(0.0 if k in (1, N) else float(U_mid) for k in range(1, N + 1))


def distance_to_end(j: int, N: int) -> int:
    """Integer distance between site j and the closest chain end."""
    if not 1 <= j <= N:
        raise SiteIndexError(f"Site {j} outside 1..{N}")
    return min(j - 1, N - j)


def perturbation_profile(N: int, delta: float, n0: float) -> Tuple[LocalPotential, ...]:
    """
    Local potentials that pump bosons between the ends and the bulk.

    Intermediate sites get a chemical-potential ramp delta·k·n (k the distance to
    the closest end); the ends get c2·n² + c1·n with c1 = ((N-1)/2 + 2 n0)·delta
    and c2 = -delta. The returned potentials already contain delta, so they are
    added to the Hamiltonian as they are.

    Args:
        N: number of sites, even and at least 4
        delta: perturbation strength
        n0: mean occupation of one end in the initial state

    Returns:
        N local potentials
    """
    if N < 4 or N % 2:
        raise UnsupportedConfigurationError(
            f"The perturbation needs an even chain with N >= 4, got N={N}"
        )
    if not math.isfinite(delta):
        raise InvalidSpecError(f"delta must be finite, got {delta}")
    if n0 < 0:
        raise InvalidSpecError(f"n0 must be nonnegative, got {n0}")

    c1 = ((N - 1) / 2 + 2 * n0) * delta
    c2 = -delta
    potentials = []
    for j in range(1, N + 1):
        if j in (1, N):
            potentials.append(LocalPotential(lin=c1, quad=c2))
        else:
            potentials.append(LocalPotential(lin=delta * distance_to_end(j, N)))
    return tuple(potentials)


def regime_hint(U: float, J: float, z: int = 2) -> Regime:
    """Mean-field classification: Mott when U/(zJ) exceeds 5.8."""
    if z < 1:
        raise InvalidSpecError(f"Neighbour count must be at least 1, got {z}")
    if J < 0:
        raise InvalidSpecError(f"Hopping must be nonnegative, got {J}")
    if J == 0:
        return Regime.MOTT
    return Regime.MOTT if U / (z * J) > MOTT_THRESHOLD else Regime.SUPERFLUID


def chain_spec(
    N: int,
    M: int,
    profile: str = Profile.PTH,
    lam: float = DEFAULT_LAMBDA,
    U_mid: float = 0.0,
    potentials: Optional[Sequence[LocalPotential]] = None,
) -> LatticeSpec:
    """Build the free-ends chain used by every experiment."""
    profile = Profile(profile)
    J = pth_couplings(N, lam) if profile is Profile.PTH else uniform_couplings(N, 1.0)
    return LatticeSpec(
        N=N,
        M=M,
        U=end_open_repulsion(N, U_mid),
        J=J,
        V=tuple(potentials) if potentials else (),
    )
