"""Flat key-value config files with one section per subcommand.

The same format serves as input (``--config`` files) and output (resolved
``config.snapshot`` files written next to run artifacts), so a snapshot can
be fed straight back to reproduce a run.  Values are plain strings; lists
are comma-joined, booleans lowercase.
"""

from __future__ import annotations

import configparser
from pathlib import Path


def read_config(path: str | Path) -> dict[str, dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"config file not found: {path}")
    # no interpolation: values are literal strings and may contain '%'
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ValueError(f"{path}: {exc}") from None
    return {section: dict(parser.items(section)) for section in parser.sections()}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


def write_config(path: str | Path, sections: dict[str, dict]) -> None:
    """Write sections, skipping None values; stable key order."""
    parser = configparser.ConfigParser(interpolation=None)
    for section, values in sections.items():
        parser[section] = {
            key: _format_value(v) for key, v in sorted(values.items()) if v is not None
        }
    with Path(path).open("w", encoding="utf-8") as fh:
        parser.write(fh)
