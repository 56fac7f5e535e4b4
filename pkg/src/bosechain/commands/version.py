"""Version command implementation."""

import numpy
import scipy
import typer

from .. import __version__
from ..utils import output_error, output_json

app = typer.Typer()


def version_info() -> dict:
    return {"bosechain": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__}


@app.command()
def version():
    """Show the package and numerical library versions."""
    try:
        output_json(version_info())
    except Exception as error:
        output_error("Failed to get version", error)
        raise typer.Exit(code=1)
