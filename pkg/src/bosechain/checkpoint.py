"""Save and load canonical states as JSON documents.

Floats are written with Python's shortest round-trip representation rather
than a fixed 17 significant digits; both parse back to the same double, so
a reloaded state is bit-identical to the saved one.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np

from .errors import ConfigError
from .symmps import BondSpectrum, CanonicalState, SiteTensor

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


def state_to_dict(state: CanonicalState) -> Dict[str, Any]:
    """
    Self-describing form of a state.

    Bonds are lists of [weight, charge]; sites are lists of
    [left_index, occupation, right_index, re, im] with indices into the
    neighbouring bond spectra.
    """
    sites = []
    for n, gamma in enumerate(state.gammas):
        entries = gamma.entries(state.spectrum(n - 1), state.spectrum(n))
        sites.append(
            [
                [alpha, int(i), beta, amp.real, amp.imag]
                for (alpha, i, beta), amp in entries
                if amp != 0
            ]
        )
    return {
        "format_version": FORMAT_VERSION,
        "N": state.N,
        "M": state.M,
        "bonds": [[[w, q] for w, q in bond.entries()] for bond in state.bonds],
        "sites": sites,
    }


def state_from_dict(data: Dict[str, Any]) -> CanonicalState:
    """Rebuild a state from state_to_dict output."""
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"Unsupported checkpoint format_version {version!r}")
    try:
        N, M = int(data["N"]), int(data["M"])
        bonds = [
            BondSpectrum(
                np.array([w for w, _ in bond], dtype=float),
                np.array([q for _, q in bond], dtype=int),
            )
            for bond in data["bonds"]
        ]
        sites: List[List[List[float]]] = data["sites"]
    except (KeyError, TypeError, ValueError) as error:
        raise ConfigError(f"Malformed checkpoint: {error}") from error
    if len(bonds) != N - 1 or len(sites) != N:
        raise ConfigError(f"Checkpoint holds {len(sites)} sites and {len(bonds)} bonds for N={N}")

    state = CanonicalState(N, M, [SiteTensor() for _ in range(N)], bonds)
    for n, entries in enumerate(sites):
        left, right = state.spectrum(n - 1), state.spectrum(n)
        left_pos = _positions(left)
        right_pos = _positions(right)
        left_dims = {q: len(idx) for q, idx in left.sectors().items()}
        right_dims = {q: len(idx) for q, idx in right.sectors().items()}
        blocks = state.gammas[n].blocks
        for alpha, i, beta, re, im in entries:
            ql, a = left_pos[int(alpha)]
            qr, b = right_pos[int(beta)]
            if qr - ql != int(i):
                raise ConfigError(f"Site {n + 1}: entry ({alpha}, {i}, {beta}) breaks the charge rule")
            key = (ql, qr)
            if key not in blocks:
                blocks[key] = np.zeros((left_dims[ql], right_dims[qr]), dtype=complex)
            blocks[key][a, b] = complex(re, im)
    state.check()
    return state


def _positions(spectrum: BondSpectrum) -> Dict[int, tuple]:
    """Bond index -> (charge, position within its sector)."""
    positions = {}
    for q, idx in spectrum.sectors().items():
        for a, alpha in enumerate(idx):
            positions[int(alpha)] = (q, a)
    return positions


def save_checkpoint(state: CanonicalState, path: Union[str, Path]) -> None:
    """Write a state; floats are written with their shortest round-trip representation."""
    path = Path(path)
    with open(path, "w") as f:
        json.dump(state_to_dict(state), f)
    log.debug("Checkpoint written to %s", path)


def load_checkpoint(path: Union[str, Path]) -> CanonicalState:
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as error:
        raise ConfigError(f"Cannot read checkpoint {path}: {error}") from error
    return state_from_dict(data)
