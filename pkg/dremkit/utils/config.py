"""
Flat ``key = value`` configuration files.

Numbers, booleans (true/false), vectors written as ``[a, b, c]`` and strings (bare or
quoted) are recognized; ``#`` starts a comment.
"""

import re
from pathlib import Path
from typing import Union

from dremkit.core import ConfigError

ConfigValue = Union[bool, int, float, str, tuple[float, ...]]

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _number(text: str) -> Union[int, float]:
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_value(text: str) -> ConfigValue:
    """
    Interpret one value.

    Args:
        text: Right-hand side of an assignment

    Returns:
        A bool, int, float, tuple of floats or string
    """
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return ()
        return tuple(float(item) for item in inner.split(","))
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return _number(text)
    except ValueError:
        return text


def _strip_comment(line: str) -> str:
    quote = None
    for i, char in enumerate(line):
        if char in "\"'":
            quote = None if quote == char else (quote or char)
        elif char == "#" and quote is None:
            return line[:i]
    return line


def parse_assignment(item: str, separator: str = "=") -> tuple[str, ConfigValue]:
    """Split ``key = value`` (or ``KEY=VALUE`` from the command line)."""
    if separator not in item:
        raise ConfigError(item, detail=f"expected key{separator}value, got '{item}'")
    key, _, value = item.partition(separator)
    key = key.strip()
    if not _KEY.match(key):
        raise ConfigError(key, detail=f"malformed key '{key}'")
    try:
        return key, parse_value(value)
    except ValueError as e:
        raise ConfigError(key, detail=f"malformed value for '{key}': {e}") from None


def parse_config_text(text: str) -> dict[str, ConfigValue]:
    """
    Parse a whole config file.

    Args:
        text: File contents

    Returns:
        Mapping of keys to values in file order; later duplicates win

    Raises:
        ConfigError: A line is not an assignment or a vector entry is not a number
    """
    values: dict[str, ConfigValue] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        try:
            key, value = parse_assignment(line)
        except ConfigError as e:
            raise ConfigError(e.key, detail=f"line {number}: {e}") from None
        values[key] = value
    return values


def load_config(path: Union[str, Path]) -> dict[str, ConfigValue]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))
