"""Bundled example input files.

The contents are illustrative: effect magnitudes and exposure rates are
assumptions chosen to exercise the pipeline, not measured data.  Real
campaigns replace these files with expert-maintained ones.
"""

from importlib.resources import files
from pathlib import Path

_NAMES = (
    "taxonomy.json",
    "odd.json",
    "effects.json",
    "occurrence.json",
    "criteria.json",
    "mitigations.json",
)


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture file."""
    if name not in _NAMES:
        raise KeyError(f"unknown fixture {name!r}, available: {_NAMES}")
    return Path(str(files(__package__) / name))
