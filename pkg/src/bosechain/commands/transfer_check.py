"""Transfer-check command implementation."""

import math
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import typer
from rich.table import Table

from ..config import RunConfig, resolve_run_config
from ..errors import BosechainError, ValidationFailure
from ..model import Profile, pth_couplings, uniform_couplings
from ..oracle import single_particle_propagate, transfer_fidelity
from ..utils import configure_logging, console, output_error, output_json, write_csv

app = typer.Typer()

TRANSFER_TOLERANCE = 1e-8


class TransferReport(NamedTuple):
    N: int
    profile: Profile
    mirror_time: float
    mirror_fidelity: float
    revival_fidelity: float
    max_fidelity: float
    t_at_max: float
    passed: Optional[bool]


def run_transfer_check(config: RunConfig) -> TransferReport:
    """
    Single-particle transfer from site 1 to site N.

    The perfect-transmission chain mirrors the particle at t = pi/lambda and
    revives it at 2·pi/lambda. Only that profile gets a pass/fail verdict.
    The sampled fidelity curve is written to config.out.
    """
    if config.profile is Profile.PTH:
        J = pth_couplings(config.N, config.lam)
    else:
        J = uniform_couplings(config.N)
    mirror_time = math.pi / config.lam
    times = np.arange(0.0, config.t_total + config.t_sample / 2, config.t_sample)
    curve = transfer_fidelity(J, 1, times)
    mirror = float(transfer_fidelity(J, 1, [mirror_time])[0])
    revival = float(abs(single_particle_propagate(J, 1, 2 * mirror_time)[0]) ** 2)
    best = int(np.argmax(curve))

    write_csv(config.out, ["t", "fidelity"], [[float(t), float(f)] for t, f in zip(times, curve)])
    passed = None
    if config.profile is Profile.PTH:
        passed = mirror >= 1 - TRANSFER_TOLERANCE and revival >= 1 - TRANSFER_TOLERANCE
    return TransferReport(
        config.N, config.profile, mirror_time, mirror, revival,
        float(curve[best]), float(times[best]), passed,
    )


def report_table(report: TransferReport) -> Table:
    table = Table(title=f"Transfer check N={report.N} profile={report.profile.value}")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    table.add_row(f"F(t={report.mirror_time:.6g})", f"{report.mirror_fidelity:.12f}")
    table.add_row(f"revival F(t={2 * report.mirror_time:.6g})", f"{report.revival_fidelity:.12f}")
    table.add_row(f"max F (t={report.t_at_max:.6g})", f"{report.max_fidelity:.12f}")
    verdict = {True: "PASS", False: "FAIL", None: "n/a"}[report.passed]
    table.add_row("verdict", verdict)
    return table


@app.command()
def transfer_check(
    config: Path = typer.Option(..., "--config", "-c", help="RunConfig JSON file"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV path for the fidelity curve"),
    as_json: bool = typer.Option(False, "--json", help="Print the report as JSON"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Check mirror-site transfer of a single particle along the chain."""
    configure_logging(verbose)
    try:
        run_config = resolve_run_config(config, "transfer-check", out)
        report = run_transfer_check(run_config)
    except BosechainError as error:
        output_error("Transfer check failed", error)
        raise typer.Exit(code=error.exit_code)
    except Exception as error:
        output_error("Transfer check failed", error)
        raise typer.Exit(code=1)

    if as_json:
        output_json(report)
    else:
        console.print(report_table(report))
    if report.passed is False:
        console.print("✗ Transfer fidelity below 1 - 1e-8", style="red")
        raise typer.Exit(code=ValidationFailure.exit_code)
    console.print(f"✓ Saved fidelity curve to {run_config.out}", style="green")
