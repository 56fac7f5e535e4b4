"""Main CLI entry point."""

import typer

from .commands import ground_scan, perturb, quench, transfer_check, validate, version

app = typer.Typer(
    name="bosechain",
    help="TEBD simulations of end-to-end entanglement in Bose-Hubbard chains",
    no_args_is_help=True,
)

# Register commands
app.command(name="version")(version.version)
app.command(name="ground-scan")(ground_scan.ground_scan)
app.command(name="quench")(quench.quench)
app.command(name="perturb")(perturb.perturb)
app.command(name="transfer-check")(transfer_check.transfer_check)
app.command(name="validate")(validate.validate)


if __name__ == "__main__":
    app()
