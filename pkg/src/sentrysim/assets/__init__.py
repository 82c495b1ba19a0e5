"""Packaged demo building, device config, and scenario scripts."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def asset_dir() -> Path:
    return Path(resources.files(__package__))  # type: ignore[arg-type]


def demo_config_path() -> Path:
    return asset_dir() / "demo.yaml"


def demo_floorplan_path() -> Path:
    return asset_dir() / "floorplan.yaml"


def scenario_path(name: str) -> Path:
    return asset_dir() / "scenarios" / f"{name}.yaml"
