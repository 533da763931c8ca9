"""Bundled case files (per unit, frozen; see scripts/build_cases.py)."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

NAMES = ("balanced_bipolar_4dc", "unbalanced_tap_4dc", "sweep_base")


def path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(f"unknown bundled case {name!r}; choose from {', '.join(NAMES)}")
    return Path(str(resources.files(__name__).joinpath(f"{name}.json")))


def load(name: str):
    from ..case_io import load as _load

    return _load(path(name))


def network(name: str):
    from ..case_io import to_network

    return to_network(load(name))
