"""Bundled scenario, game and sweep files."""

from __future__ import annotations

from pathlib import Path

ROOT = Path(__file__).resolve().parent


def path(kind: str, name: str) -> Path:
    """Location of a bundled file; ``.json`` is appended when missing."""
    if not name.endswith(".json"):
        name += ".json"
    return ROOT / kind / Path(name).name


def names(kind: str) -> list[str]:
    return sorted(p.stem for p in (ROOT / kind).glob("*.json"))
