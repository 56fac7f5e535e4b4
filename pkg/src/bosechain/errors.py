"""Exception types raised by bosechain.

Every error carries the process exit code the CLI reports when it surfaces.
"""

from typing import Any, Optional


class BosechainError(Exception):
    """Base class for all bosechain errors."""

    exit_code = 1


class InvalidSizeError(BosechainError, ValueError):
    """A site or boson count is outside the supported range."""


class InvalidSpecError(BosechainError, ValueError):
    """A lattice specification violates its invariants."""


class UnsupportedConfigurationError(BosechainError, ValueError):
    """The requested combination of parameters is not supported."""


class SiteIndexError(BosechainError, IndexError):
    """A site or bond index is out of range."""


class InvalidInputError(BosechainError, ValueError):
    """Malformed input data (negative occupations, bad shapes, ...)."""


class ShapeMismatchError(BosechainError, ValueError):
    """Two states or operators do not share N and M."""


class CorruptionError(BosechainError, RuntimeError):
    """The tensor network reached a state that cannot be represented."""


class InvalidOperatorError(BosechainError, ValueError):
    """An operator expected to be Hermitian is not."""


class InvalidDensityError(BosechainError, ValueError):
    """A density matrix has a significantly negative eigenvalue."""


class CapacityError(BosechainError):
    """The Fock basis would exceed the configured capacity."""

    exit_code = 4


class ConfigError(BosechainError):
    """A run configuration or environment variable is invalid."""

    exit_code = 4


class NonConvergenceError(BosechainError):
    """Imaginary-time evolution hit its step cap before converging."""

    exit_code = 2

    def __init__(self, message: str, result: Optional[Any] = None):
        super().__init__(message)
        self.result = result


class ValidationFailure(BosechainError):
    """One or more oracle cross-checks failed."""

    exit_code = 3
