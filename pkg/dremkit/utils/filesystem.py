"""
Filesystem utilities for dremkit.
"""

import os
import re
from pathlib import Path
from typing import Optional, Union

OUT_DIR_ENV = "DREM_OUT_DIR"
DEFAULT_OUT_DIR = "output"


def sanitize_filename(filename: str) -> str:
    """
    Convert a string into a safe filename.

    Args:
        filename: Original filename

    Returns:
        Sanitized filename
    """
    # Remove invalid characters
    filename = re.sub(r'[<>:"/\\|?*]', "", filename)
    filename = filename.replace(" ", "_")
    filename = re.sub(r"_+", "_", filename)
    filename = filename[:255].rstrip(".")
    return filename or "untitled"


def output_dir(explicit: Optional[Union[str, Path]] = None) -> Path:
    """
    Resolve and create the directory traces are written to.

    An explicit path wins over ``DREM_OUT_DIR``, which wins over ``./output``.
    """
    chosen = explicit or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def trace_filename(scenario: str, config_path: Optional[Union[str, Path]] = None) -> str:
    """``<scenario>.csv``, or ``<scenario>-<config stem>.csv`` for runs from a config file."""
    stem = sanitize_filename(scenario)
    if config_path is not None:
        stem = f"{stem}-{sanitize_filename(Path(config_path).stem)}"
    return f"{stem}.csv"
