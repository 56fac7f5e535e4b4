"""Quench command implementation."""

import time
from pathlib import Path
from typing import Callable, List, Optional, Sequence

import typer

from ..checkpoint import save_checkpoint
from ..config import RunConfig, get_thread_count, resolve_run_config
from ..errors import BosechainError
from ..model import LatticeSpec
from ..observables import TrajectoryRecord
from ..symmps import CanonicalState, product_state
from ..tebd import default_occupations, evolve
from ..utils import (
    configure_logging,
    console,
    format_elapsed_time,
    output_error,
    progress_bar,
    write_csv,
)

app = typer.Typer()

OBSERVABLE_COLUMNS = ["zeta", "S_half", "S_ends", "logneg", "eps", "chi_max_now", "discarded_cum"]


def trajectory_header(N: int, verbose: bool = False, warning: bool = False) -> List[str]:
    header = ["t"] + [f"n_{k}" for k in range(1, N + 1)] + OBSERVABLE_COLUMNS
    if verbose:
        header.append("zeta_sym")
        header += [f"S_{l}" for l in range(1, N)]
    if warning:
        header.append("warning")
    return header


def trajectory_rows(
    records: Sequence[TrajectoryRecord], M: int, verbose: bool = False, warning: bool = False
) -> List[list]:
    rows = []
    for record in records:
        row = [record.t, *record.densities, record.zeta, record.S_half, record.S_ends,
               record.logneg, record.eps, record.chi_max_now, record.discarded_cum]
        if verbose:
            row.append((record.densities[0] + record.densities[-1]) / M)
            row += record.entropies
        if warning:
            row.append(record.truncation_warning)
        rows.append(row)
    return rows


def write_trajectory(
    path: Path,
    records: Sequence[TrajectoryRecord],
    M: int,
    verbose: bool = False,
    comments: Sequence[str] = (),
) -> None:
    """Time-series CSV; the warning column appears only when the truncation budget was exceeded."""
    N = len(records[0].densities)
    warning = any(record.truncation_warning for record in records)
    write_csv(
        path,
        trajectory_header(N, verbose, warning),
        trajectory_rows(records, M, verbose, warning),
        comments,
    )


def dynamics_workers(N: int) -> int:
    """Threads for one parity layer: at most one per gate."""
    return max(1, min(get_thread_count(), (N - 1) // 2))


def run_dynamics(
    state: CanonicalState,
    spec: LatticeSpec,
    config: RunConfig,
    verbose: bool = False,
    comments: Sequence[str] = (),
    progress: Optional[Callable[..., None]] = None,
) -> List[TrajectoryRecord]:
    """Evolve in real time, write the trajectory CSV and the optional final checkpoint."""
    records = evolve(state, spec, config.real_params(dynamics_workers(spec.N)), progress=progress)
    write_trajectory(config.out, records, config.M, verbose, comments)
    if config.checkpoint:
        save_checkpoint(state, config.checkpoint)
    return records


def run_quench(
    config: RunConfig, verbose: bool = False, progress: Optional[Callable[..., None]] = None
) -> List[TrajectoryRecord]:
    """Evolve the Mott product state (balanced product state when M != N) under the chain."""
    spec = config.spec()
    state = product_state(default_occupations(config.N, config.M))
    comments = [
        f"quench N={config.N} M={config.M} profile={config.profile.value} "
        f"lambda={config.lam:.17g} U_mid={config.U_mid:.17g} dt={config.step:.17g}"
    ]
    return run_dynamics(state, spec, config, verbose, comments, progress)


def total_steps(config: RunConfig) -> int:
    return int(round(config.t_total / config.step))


@app.command()
def quench(
    config: Path = typer.Option(..., "--config", "-c", help="RunConfig JSON file"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV output path"),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Save the final state"),
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Debug logging, zeta_sym and block-entropy columns"
    ),
):
    """
    Evolve a Mott insulator in real time.

    Records densities, entropies, log-negativity and witness every record_every steps.
    """
    configure_logging(verbose)
    try:
        run_config = resolve_run_config(config, "quench", out, checkpoint)
        start_time = time.time()
        with progress_bar("Evolving", total=total_steps(run_config)) as update:
            records = run_quench(run_config, verbose, progress=update)
    except BosechainError as error:
        output_error("Quench failed", error)
        raise typer.Exit(code=error.exit_code)
    except Exception as error:
        output_error("Quench failed", error)
        raise typer.Exit(code=1)

    elapsed = format_elapsed_time(time.time() - start_time)
    console.print(f"✓ Saved {len(records)} rows to {run_config.out} in {elapsed}", style="green")
    if run_config.checkpoint:
        console.print(f"✓ Saved checkpoint to {run_config.checkpoint}", style="green")
