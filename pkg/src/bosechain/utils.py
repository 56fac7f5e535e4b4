"""Utility functions for the CLI."""

import contextlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Callable, Iterator, Optional, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.progress import BarColumn, Progress, TextColumn, TimeElapsedColumn

console = Console()
err_console = Console(stderr=True)


def configure_logging(verbose: bool = False) -> None:
    """Route library logging through rich on stderr."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def output_json(data: Any) -> None:
    """
    Output data as JSON to stdout.

    Args:
        data: A JSON-serializable value or a NamedTuple record
    """
    if hasattr(data, "_asdict"):
        data = data._asdict()

    json.dump(data, sys.stdout, indent=2)
    print()  # Add newline at the end


def output_error(message: str, error: Optional[Exception] = None) -> None:
    """
    Output an error message as JSON to stdout.

    Args:
        message: The error message
        error: Optional exception object
    """
    error_data = {"error": message}

    if error:
        error_data["details"] = str(error)
        error_data["type"] = type(error).__name__
        if hasattr(error, "exit_code"):
            error_data["exit_code"] = error.exit_code

    output_json(error_data)


def format_elapsed_time(seconds: float) -> str:
    """
    Format elapsed time in seconds to a human-readable string.

    Args:
        seconds: The number of seconds elapsed

    Returns:
        Formatted time string (e.g., "45s" or "1m 23s")
    """
    seconds = int(seconds)
    if seconds < 60:
        return f"{seconds}s"

    minutes = seconds // 60
    remaining_seconds = seconds % 60
    return f"{minutes}m {remaining_seconds}s"


def format_field(value: Any) -> str:
    """CSV text of one value; floats carry 17 significant digits."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.17g}"
    return str(value)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
    comments: Sequence[str] = (),
) -> None:
    """
    Write a CSV file with optional leading '# ' comment lines.

    Output depends only on the arguments, so identical runs give identical bytes.
    """
    lines = [f"# {comment}" for comment in comments]
    lines.append(",".join(header))
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"Row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(format_field(value) for value in row))
    with open(path, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")


@contextlib.contextmanager
def progress_bar(description: str, total: Optional[int]) -> Iterator[Callable[..., None]]:
    """
    Transient progress bar; yields an update(completed, ...) callback.

    Extra positional arguments to the callback are ignored so it can be
    handed straight to the evolution drivers.
    """
    progress = Progress(
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed}/{task.total}"),
        TimeElapsedColumn(),
        console=err_console,
        transient=True,
    )
    with progress:
        task = progress.add_task(description, total=total)

        def update(completed: int, *_: Any) -> None:
            progress.update(task, completed=completed)

        yield update
