"""Perturb command implementation."""

import time
from pathlib import Path
from typing import Callable, List, NamedTuple, Optional

import typer

from ..config import RunConfig, resolve_run_config
from ..errors import BosechainError
from ..model import perturbation_profile
from ..observables import TrajectoryRecord, local_density
from ..tebd import ground_state
from ..utils import configure_logging, console, format_elapsed_time, output_error, progress_bar
from .quench import run_dynamics, total_steps

app = typer.Typer()


class PerturbRun(NamedTuple):
    n0: float
    c1: float
    c2: float
    records: List[TrajectoryRecord]


def run_perturb(
    config: RunConfig, verbose: bool = False, progress: Optional[Callable[..., None]] = None
) -> PerturbRun:
    """
    Drive the unperturbed ground state with the end/bulk pumping potential.

    n0 is measured on the ground state unless the config fixes it.
    """
    spec = config.spec()
    ground = ground_state(spec, config.ground_params())
    n0 = config.n0 if config.n0 is not None else local_density(ground.state, 1)
    potentials = perturbation_profile(config.N, config.delta, n0)
    c1, c2 = potentials[0].lin, potentials[0].quad
    comments = [
        f"perturb N={config.N} M={config.M} profile={config.profile.value} "
        f"lambda={config.lam:.17g} U_mid={config.U_mid:.17g} dt={config.step:.17g}",
        f"delta={config.delta:.17g} n0={n0:.17g} c1={c1:.17g} c2={c2:.17g}",
    ]
    records = run_dynamics(
        ground.state, spec.with_potentials(potentials), config, verbose, comments, progress
    )
    return PerturbRun(n0, c1, c2, records)


@app.command()
def perturb(
    config: Path = typer.Option(..., "--config", "-c", help="RunConfig JSON file"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV output path"),
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Save the final state"),
    verbose: bool = typer.Option(
        False, "--verbose", "-v", help="Debug logging, zeta_sym and block-entropy columns"
    ),
):
    """
    Evolve a ground state under a small perturbation potential.

    The ends get c2·n² + c1·n and intermediate sites a ramp delta·k·n.
    """
    configure_logging(verbose)
    try:
        run_config = resolve_run_config(config, "perturb", out, checkpoint)
        start_time = time.time()
        with progress_bar("Evolving", total=total_steps(run_config)) as update:
            run = run_perturb(run_config, verbose, progress=update)
    except BosechainError as error:
        output_error("Perturbation run failed", error)
        raise typer.Exit(code=error.exit_code)
    except Exception as error:
        output_error("Perturbation run failed", error)
        raise typer.Exit(code=1)

    elapsed = format_elapsed_time(time.time() - start_time)
    console.print(f"n0={run.n0:.6f} c1={run.c1:.6g} c2={run.c2:.6g}")
    console.print(f"✓ Saved {len(run.records)} rows to {run_config.out} in {elapsed}", style="green")
    if run_config.checkpoint:
        console.print(f"✓ Saved checkpoint to {run_config.checkpoint}", style="green")
