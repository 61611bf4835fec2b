"""Bundled data files.

``desk/`` holds the synthetic desk-scale dataset (see `nodepower.synthetic`
for how it is produced and what it is, and is not, faithful to).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

__all__ = ["desk_dir", "desk_manifest", "desk_exclusions"]


def desk_dir() -> Path:
    """Directory of the bundled synthetic dataset."""
    return Path(resources.files(__name__) / "desk")


def desk_manifest() -> Path:
    return desk_dir() / "manifest.csv"


def desk_exclusions() -> Path:
    return desk_dir() / "exclusions.csv"
