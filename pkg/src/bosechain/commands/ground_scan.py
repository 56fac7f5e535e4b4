"""Ground-scan command implementation."""

import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional

import typer

from ..checkpoint import save_checkpoint
from ..config import RunConfig, get_thread_count, resolve_run_config
from ..errors import BosechainError, NonConvergenceError
from ..observables import (
    densities,
    end_pair_rdm,
    entropy_profile,
    epsilon_witness,
    log_negativity,
    von_neumann_entropy,
)
from ..tebd import GroundStateResult, ground_state
from ..utils import (
    configure_logging,
    console,
    format_elapsed_time,
    output_error,
    progress_bar,
    write_csv,
)

app = typer.Typer()

HEADER = ["U", "zeta", "energy", "S_half", "S_ends", "logneg", "eps", "chi_max", "steps"]
CHI_HEADER = ["U", "step", "chi"]


class ScanPoint(NamedTuple):
    U: float
    result: GroundStateResult
    converged: bool


def scan_point(config: RunConfig, U: float) -> ScanPoint:
    """
    Ground state at one intermediate repulsion.

    A point that hits the step cap keeps its last state and is flagged.
    """
    try:
        return ScanPoint(U, ground_state(config.spec(U), config.ground_params()), True)
    except NonConvergenceError as error:
        return ScanPoint(U, error.result, False)


def scan_row(point: ScanPoint, M: int, verbose: bool = False) -> list:
    state = point.result.state
    dens = densities(state)
    profile = entropy_profile(state)
    rho = end_pair_rdm(state)
    row = [
        point.U,
        2 * dens[0] / M,
        point.result.energy,
        profile[state.N // 2 - 1],
        von_neumann_entropy(rho),
        log_negativity(rho),
        epsilon_witness(rho),
        state.chi,
        point.result.steps,
    ]
    if verbose:
        row.append((dens[0] + dens[-1]) / M)
        row += profile
    return row


def chi_history_path(out: Path) -> Path:
    return out.with_suffix(".chi.csv")


def chi_rows(points: List[ScanPoint]) -> List[list]:
    """Bond dimension per imaginary-time step, kept only where it changes and at the last step."""
    rows = []
    for point in points:
        history = point.result.chi_history
        for step, chi in enumerate(history, start=1):
            if step == 1 or chi != history[step - 2] or step == len(history):
                rows.append([point.U, step, chi])
    return rows


def run_ground_scan(
    config: RunConfig,
    verbose: bool = False,
    workers: Optional[int] = None,
    progress: Optional[Callable[[int], None]] = None,
) -> List[ScanPoint]:
    """
    Ground states over config.U_values, written as one CSV row per value.

    Points run on a thread pool; rows keep the input order. A status column
    is appended only when some point failed to converge.
    """
    workers = min(workers or get_thread_count(), len(config.U_values))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(scan_point, config, U) for U in config.U_values]
        for done, _ in enumerate(as_completed(futures), start=1):
            if progress:
                progress(done)
        points = [future.result() for future in futures]

    header = list(HEADER)
    if verbose:
        header += ["zeta_sym"] + [f"S_{l}" for l in range(1, config.N)]
    rows = [scan_row(point, config.M, verbose) for point in points]
    if not all(point.converged for point in points):
        header.append("status")
        for row, point in zip(rows, points):
            row.append("converged" if point.converged else "nonconverged")
    comments = [
        f"ground-scan N={config.N} M={config.M} profile={config.profile.value} "
        f"lambda={config.lam:.17g} ground_dt={config.ground_step:.17g} tol={config.tol:.17g}"
    ]
    write_csv(config.out, header, rows, comments)
    write_csv(chi_history_path(config.out), CHI_HEADER, chi_rows(points), comments)

    if config.checkpoint:
        save_checkpoint(points[-1].result.state, config.checkpoint)
    return points


@app.command()
def ground_scan(
    config: Path = typer.Option(..., "--config", "-c", help="RunConfig JSON file"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV output path"),
    checkpoint: Optional[Path] = typer.Option(
        None, "--checkpoint", help="Save the ground state of the last scan point"
    ),
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Debug logging, zeta_sym and block-entropy columns"
    ),
):
    """
    Scan ground states over the intermediate-site repulsion.

    Writes U, zeta, energy, entropies, log-negativity and witness per point,
    and the bond-dimension history of every point next to the output.
    """
    configure_logging(verbose)
    try:
        run_config = resolve_run_config(config, "ground-scan", out, checkpoint)
        start_time = time.time()
        with progress_bar("Scanning U", total=len(run_config.U_values)) as update:
            points = run_ground_scan(run_config, verbose, progress=update)
    except BosechainError as error:
        output_error("Ground-state scan failed", error)
        raise typer.Exit(code=error.exit_code)
    except Exception as error:
        output_error("Ground-state scan failed", error)
        raise typer.Exit(code=1)

    elapsed = format_elapsed_time(time.time() - start_time)
    console.print(f"✓ Saved {len(points)} rows to {run_config.out} in {elapsed}", style="green")
    console.print(f"✓ Saved bond dimensions to {chi_history_path(run_config.out)}", style="green")
    if run_config.checkpoint:
        console.print(f"✓ Saved checkpoint to {run_config.checkpoint}", style="green")

    failed = [point.U for point in points if not point.converged]
    if failed:
        console.print(f"✗ {len(failed)} point(s) did not converge: {failed}", style="red")
        raise typer.Exit(code=NonConvergenceError.exit_code)
