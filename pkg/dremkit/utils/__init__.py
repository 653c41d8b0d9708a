"""
Configuration parsing and output-path helpers.
"""

from .config import load_config, parse_assignment, parse_config_text, parse_value
from .filesystem import output_dir, sanitize_filename, trace_filename

__all__ = [
    "load_config",
    "output_dir",
    "parse_assignment",
    "parse_config_text",
    "parse_value",
    "sanitize_filename",
    "trace_filename",
]
