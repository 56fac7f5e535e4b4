"""Run configuration and environment settings."""

import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from dotenv import load_dotenv

from .errors import ConfigError
from .model import DEFAULT_LAMBDA, LatticeSpec, Profile, chain_spec
from .symmps import DEFAULT_REL_THRESHOLD, TruncationPolicy
from .tebd import EvolutionParams, Mode

# Load environment variables from .env file
load_dotenv()

DEFAULT_CAPACITY = 200_000

EXPERIMENTS = ("ground-scan", "quench", "perturb", "transfer-check", "validate")


def default_u_grid() -> Tuple[float, ...]:
    """25 log-spaced repulsion values from 0.1 to 100."""
    return tuple(float(u) for u in np.logspace(-1, 2, 25))


def get_thread_count() -> int:
    """
    Worker threads from BOSECHAIN_THREADS.

    Returns:
        The configured count, or the CPU count when unset

    Raises:
        ConfigError: If BOSECHAIN_THREADS is not a positive integer
    """
    value = os.environ.get("BOSECHAIN_THREADS")
    if not value:
        return os.cpu_count() or 1
    try:
        threads = int(value)
    except ValueError:
        threads = 0
    if threads < 1:
        raise ConfigError(
            f"BOSECHAIN_THREADS must be a positive integer, got {value!r}. "
            "Please fix it in your environment or .env file."
        )
    return threads


def get_oracle_capacity() -> int:
    """Fock-basis capacity from BOSECHAIN_ORACLE_CAP (default 200000)."""
    value = os.environ.get("BOSECHAIN_ORACLE_CAP")
    if not value:
        return DEFAULT_CAPACITY
    try:
        cap = int(value)
    except ValueError:
        cap = 0
    if cap < 1:
        raise ConfigError(f"BOSECHAIN_ORACLE_CAP must be a positive integer, got {value!r}")
    return cap


@dataclass(frozen=True)
class RunConfig:
    """One experiment, as read from a JSON document."""

    experiment: str
    N: int
    M: int
    profile: Profile = Profile.PTH
    lam: float = DEFAULT_LAMBDA
    U_values: Tuple[float, ...] = field(default_factory=default_u_grid)
    U_mid: float = 0.0
    delta: Optional[float] = None
    n0: Optional[float] = None
    dt: Optional[float] = None
    t_total: float = math.pi
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    record_every: int = 100
    out: Optional[Path] = None
    checkpoint: Optional[Path] = None
    allow_unequal_filling: bool = False
    tol: float = 1e-14
    max_steps: int = 1_000_000
    ground_dt: Optional[float] = None
    discarded_budget: float = 1e-6
    t_sample: float = 1e-3

    @property
    def step(self) -> float:
        return self.dt if self.dt is not None else 1e-3 / self.N

    @property
    def ground_step(self) -> float:
        return self.ground_dt if self.ground_dt is not None else 1e-3 / self.N

    def spec(self, U_mid: Optional[float] = None) -> LatticeSpec:
        """Free-ends chain of this run, optionally at another intermediate repulsion."""
        return chain_spec(
            self.N, self.M, self.profile, self.lam, self.U_mid if U_mid is None else U_mid
        )

    def ground_params(self, workers: int = 1) -> EvolutionParams:
        return EvolutionParams(
            dt=self.ground_step,
            tol=self.tol,
            policy=self.policy,
            mode=Mode.IMAGINARY,
            max_steps=self.max_steps,
            workers=workers,
        )

    def real_params(self, workers: int = 1) -> EvolutionParams:
        return EvolutionParams(
            dt=self.step,
            t_total=self.t_total,
            policy=self.policy,
            record_every=self.record_every,
            mode=Mode.REAL,
            discarded_budget=self.discarded_budget,
            workers=workers,
        )



_NUMBER = (int, float)
_FIELDS: Dict[str, tuple] = {
    "experiment": (str,),
    "N": (int,),
    "M": (int,),
    "profile": (str,),
    "lambda": _NUMBER,
    "U_values": (list,),
    "U_mid": _NUMBER,
    "delta": _NUMBER,
    "n0": _NUMBER,
    "dt": _NUMBER,
    "t_total": _NUMBER,
    "policy": (dict,),
    "record_every": (int,),
    "out": (str,),
    "checkpoint": (str,),
    "allow_unequal_filling": (bool,),
    "tol": _NUMBER,
    "max_steps": (int,),
    "ground_dt": _NUMBER,
    "discarded_budget": _NUMBER,
    "t_sample": _NUMBER,
}


def _check_types(data: Dict[str, Any]) -> None:
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
    for key, value in data.items():
        expected = _FIELDS[key]
        # bool is an int subclass; only allow_unequal_filling takes booleans
        if isinstance(value, bool) and bool not in expected:
            raise ConfigError(f"Config key {key!r} must not be a boolean")
        if not isinstance(value, expected):
            names = " or ".join(t.__name__ for t in expected)
            raise ConfigError(f"Config key {key!r} must be {names}, got {type(value).__name__}")


def _policy(data: Dict[str, Any]) -> TruncationPolicy:
    unknown = sorted(set(data) - {"rel_threshold", "chi_max"})
    if unknown:
        raise ConfigError(f"Unknown policy keys: {', '.join(unknown)}")
    chi_max = data.get("chi_max")
    if chi_max is not None and (isinstance(chi_max, bool) or not isinstance(chi_max, int)):
        raise ConfigError("policy.chi_max must be an integer")
    try:
        return TruncationPolicy(
            rel_threshold=float(data.get("rel_threshold", DEFAULT_REL_THRESHOLD)), chi_max=chi_max
        )
    except (TypeError, ValueError) as error:
        raise ConfigError(f"Invalid truncation policy: {error}") from error


def parse_run_config(data: Dict[str, Any], experiment: Optional[str] = None) -> RunConfig:
    """
    Validate a decoded config document.

    Args:
        data: the decoded JSON object
        experiment: the subcommand being run; fills in or must match data["experiment"]

    Returns:
        RunConfig

    Raises:
        ConfigError: On unknown keys, wrong types or violated invariants
    """
    if not isinstance(data, dict):
        raise ConfigError("Config document must be a JSON object")
    data = dict(data)
    if experiment is not None:
        declared = data.setdefault("experiment", experiment)
        if declared != experiment:
            raise ConfigError(f"Config is for {declared!r} but {experiment!r} was requested")
    _check_types(data)
    for key in ("experiment", "N", "M"):
        if key not in data:
            raise ConfigError(f"Config is missing required key {key!r}")
    if data["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"Unknown experiment {data['experiment']!r}")

    try:
        profile = Profile(data.get("profile", Profile.PTH.value))
    except ValueError as error:
        raise ConfigError(f"Unknown profile {data['profile']!r}") from error

    kwargs: Dict[str, Any] = {
        key: data[key]
        for key in (
            "experiment", "N", "M", "U_mid", "delta", "n0", "dt", "t_total", "record_every",
            "allow_unequal_filling", "tol", "max_steps", "ground_dt", "discarded_budget", "t_sample",
        )
        if key in data
    }
    kwargs["profile"] = profile
    if "lambda" in data:
        kwargs["lam"] = float(data["lambda"])
    if "U_values" in data:
        values = data["U_values"]
        if not values or not all(isinstance(u, _NUMBER) and not isinstance(u, bool) for u in values):
            raise ConfigError("U_values must be a nonempty list of numbers")
        kwargs["U_values"] = tuple(float(u) for u in values)
    if "policy" in data:
        kwargs["policy"] = _policy(data["policy"])
    for key in ("out", "checkpoint"):
        if key in data:
            kwargs[key] = Path(data[key])

    config = RunConfig(**kwargs)
    _check_invariants(config)
    return config


def _check_invariants(config: RunConfig) -> None:
    if config.N < 2:
        raise ConfigError(f"N must be at least 2, got {config.N}")
    if config.M < 1:
        raise ConfigError(f"M must be at least 1, got {config.M}")
    if config.M != config.N and not config.allow_unequal_filling:
        raise ConfigError(
            f"M={config.M} differs from N={config.N}; set allow_unequal_filling to run it"
        )
    if config.experiment in ("ground-scan", "perturb") and config.N % 2:
        raise ConfigError(f"{config.experiment} needs an even number of sites, got N={config.N}")
    if config.experiment == "perturb" and config.delta is None:
        raise ConfigError("perturb needs delta")
    if not config.lam > 0:
        raise ConfigError(f"lambda must be positive, got {config.lam}")
    if config.dt is not None and not config.dt > 0:
        raise ConfigError(f"dt must be positive, got {config.dt}")
    if config.ground_dt is not None and not config.ground_dt > 0:
        raise ConfigError(f"ground_dt must be positive, got {config.ground_dt}")
    for key in ("tol", "discarded_budget", "t_sample"):
        if not getattr(config, key) > 0:
            raise ConfigError(f"{key} must be positive, got {getattr(config, key)}")
    if config.t_total < 0:
        raise ConfigError(f"t_total must be nonnegative, got {config.t_total}")
    if config.record_every < 1 or config.max_steps < 1:
        raise ConfigError("record_every and max_steps must be at least 1")
    if config.U_mid < 0 or any(u < 0 for u in config.U_values):
        raise ConfigError("Repulsion values must be nonnegative")


def load_run_config(path: Union[str, Path], experiment: Optional[str] = None) -> RunConfig:
    """Read and validate a RunConfig JSON file."""
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as error:
        raise ConfigError(f"Cannot read config {path}: {error}") from error
    except json.JSONDecodeError as error:
        raise ConfigError(f"Config {path} is not valid JSON: {error}") from error
    return parse_run_config(data, experiment)


def resolve_run_config(
    path: Union[str, Path],
    experiment: str,
    out: Optional[Path] = None,
    checkpoint: Optional[Path] = None,
) -> RunConfig:
    """
    Load a config for one subcommand and apply command-line overrides.

    The output path falls back to <experiment>.csv in the working directory.
    """
    config = load_run_config(path, experiment)
    return replace(
        config,
        out=out or config.out or Path(f"{experiment}.csv"),
        checkpoint=checkpoint or config.checkpoint,
    )
